#!/usr/bin/env python3
"""
End-to-end maskworld pipeline demo.

This script walks through the core workflow on a small reach dataset:
1. Generate training tuples with the kinematic oracle
2. Train a mask-conditioned latent predictor
3. Roll the predictor out on one tuple and score it
4. Plan toward a goal image with CEM
5. Rank a noise-graded family of scripted policies with the learned world
"""

import os
import sys
import subprocess
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

PROJECT_ROOT = Path(__file__).parent.parent


def print_banner(title, char="="):
    """Print a banner with title."""
    width = 70
    print(f"\n{char * width}")
    print(f"{title:^{width}}")
    print(f"{char * width}")


def print_step(step_num, title):
    """Print a step header."""
    print(f"\n🔸 Step {step_num}: {title}")
    print("-" * 50)


def run_command(args, description):
    """Run a maskworld subcommand and return success status."""
    cmd = [sys.executable, "-m", "src.cli.main", *args]

    print(f"🚀 {description}")
    print(f"📝 Running: maskworld {' '.join(args)}")

    try:
        result = subprocess.run(cmd, capture_output=True, text=True, cwd=PROJECT_ROOT)

        if result.stdout:
            print("📋 Output:")
            print(result.stdout)

        if result.stderr:
            print("⚠️  Errors/Warnings:")
            print(result.stderr)

        if result.returncode == 0:
            print("✅ Command completed successfully!")
            return True
        print(f"❌ Command failed with return code {result.returncode}")
        return False

    except Exception as e:
        print(f"❌ Error running command: {e}")
        return False


def show_report(path):
    """Print a markdown report if it exists."""
    if path.exists():
        print(f"📄 {path.name}:")
        print("-" * 40)
        print(path.read_text())
        print("-" * 40)
    else:
        print(f"📄 No report at {path}")


def demo_workflow(workdir: Path, interactive: bool):
    """Run the complete demo workflow."""
    print_banner("🤖 maskworld Pipeline Demo", "🎯")
    print(f"""
🔄 Workflow Overview:
   1. Generate reach tuples with the oracle
   2. Train a mask-conditioned predictor
   3. Roll out and score one tuple
   4. Plan toward the task goal
   5. Rank scripted policies in the learned world

📁 Working directory: {workdir}
    """)

    def pause(message):
        if interactive:
            input(message)

    pause("Press Enter to continue...")
    data, model = workdir / "data", workdir / "model.npz"
    common = ["--seed", os.getenv("MASKWORLD_SEED", "0"), "--video-width", "32", "--video-height", "32"]

    print_step(1, "Generate Dataset")
    if not run_command(["gen-data", "--out", str(data), "--data-count", "8", "--video-T", "9", *common],
                       "Generating 8 reach tuples"):
        return False

    pause("\nPress Enter to train the predictor...")
    print_step(2, "Train Predictor")
    if not run_command(["train", "--data", str(data), "--out", str(model), "--train-epochs", "5", *common],
                       "Training for 5 epochs"):
        return False

    print_step(3, "Rollout")
    if not run_command(["rollout", "--model", str(model), "--data", str(data), "--tuple", "0",
                        "--out", str(workdir / "rollout"), *common], "Predicting tuple 0"):
        return False
    show_report(workdir / "rollout" / "metrics.md")

    pause("\nPress Enter to plan...")
    print_step(4, "CEM Plan")
    if not run_command(["plan", "--out", str(workdir / "plan" / "plan.json"), "--data-task", "planar_reach",
                        "--robot-urdf", "planar2", "--plan-search-dims", "0,1", *common],
                       "Planning a planar reach with the oracle"):
        return False

    print_step(5, "Policy Evaluation")
    if not run_command(["policy-eval", "--model", str(model), "--out", str(workdir / "eval" / "report.csv"),
                        "--eval-episodes", "4", *common], "Ranking the noise family"):
        return False
    show_report(workdir / "eval" / "report.md")

    print_banner("✅ Demo Workflow Completed!", "🎉")
    return True


def main():
    """Main function."""
    workdir = Path(sys.argv[1] if len(sys.argv) > 1 else PROJECT_ROOT / "demo_output").resolve()
    interactive = sys.stdin.isatty() and os.getenv("MASKWORLD_DEMO_BATCH", "0") != "1"
    try:
        success = demo_workflow(workdir, interactive)
        return 0 if success else 1
    except KeyboardInterrupt:
        print("\n🛑 Demo interrupted by user")
        return 1
    except Exception as e:
        print(f"❌ Unexpected error during demo: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
