#!/usr/bin/env python3
"""
Test runner for matchlab
"""

import os
import subprocess
import sys

from dotenv import load_dotenv


# Load environment variables
load_dotenv()

TEST_MAP = {
    "torus": ("tests/test_torus.py", "Torus Geometry"),
    "kernels": ("tests/test_kernels.py", "Heat and Integrated Kernels"),
    "green": ("tests/test_green.py", "Green Function and Mollifier"),
    "inequalities": ("tests/test_inequalities.py", "Kernel Inequalities"),
    "field": ("tests/test_field.py", "Linearization Field"),
    "semidiscrete": ("tests/test_semidiscrete.py", "Semi-discrete Solver"),
    "integrals": ("tests/test_integrals.py", "Transport Integrals"),
    "estimators": ("tests/test_estimators.py", "Monte Carlo Estimators"),
    "fitting": ("tests/test_fitting.py", "Rate Fitting"),
    "config": ("tests/test_config.py", "Run Configuration"),
    "runner": ("tests/test_replica_runner.py", "Replica Runner"),
    "recorder": ("tests/test_run_recorder.py", "Run Recorder"),
    "selfcheck": ("tests/test_selfcheck.py", "Self-checks"),
    "cli": ("tests/test_cli.py", "Command Line"),
}


def _pytest(test_file: str, timeout: int, capture: bool) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "pytest", test_file, "-q"],
        capture_output=capture,
        text=True,
        timeout=timeout,
    )


def run_test_suite():
    """Run the complete test suite area by area"""
    print("🧪 matchlab Test Suite")
    print("=" * 50)

    run_slow = bool(os.getenv("MATCHLAB_RUN_SLOW"))
    print(f"Slow Monte Carlo tests: {'✓ enabled' if run_slow else '✗ skipped (set MATCHLAB_RUN_SLOW=1)'}")
    print()

    all_passed = True
    timeout = 3600 if run_slow else 600

    for test_file, description in TEST_MAP.values():
        print(f"Running {description} Tests...")
        print("-" * 40)

        try:
            result = _pytest(test_file, timeout, capture=True)

            if result.returncode == 0:
                print(f"✓ {description} tests PASSED")
                output_lines = result.stdout.split("\n")
                for line in output_lines[-3:]:
                    if line.strip():
                        print(f"  {line}")
            else:
                print(f"✗ {description} tests FAILED")
                print("STDOUT:", result.stdout[-500:])
                print("STDERR:", result.stderr[-500:])
                all_passed = False

        except subprocess.TimeoutExpired:
            print(f"✗ {description} tests TIMED OUT")
            all_passed = False
        except Exception as e:
            print(f"✗ {description} tests ERROR: {e}")
            all_passed = False

        print()

    print("=" * 50)
    if all_passed:
        print("🎉 ALL TESTS PASSED!")
        if not run_slow:
            print("ℹ  Set MATCHLAB_RUN_SLOW=1 to include the long Monte Carlo checks")
    else:
        print("❌ SOME TESTS FAILED")
        print("Please review the errors above and fix any issues.")

    return all_passed


def run_specific_test(test_name):
    """Run one area of the suite"""
    if test_name not in TEST_MAP:
        print(f"Unknown test: {test_name}")
        print(f"Available tests: {', '.join(TEST_MAP.keys())}")
        return False

    test_file, description = TEST_MAP[test_name]
    print(f"Running {description} tests...")

    try:
        result = _pytest(test_file, timeout=3600, capture=False)
        return result.returncode == 0
    except Exception as e:
        print(f"Error running test: {e}")
        return False


def run_pytest():
    """Run tests using pytest"""
    print("Running tests with pytest...")
    try:
        result = subprocess.run([sys.executable, "-m", "pytest", "tests/", "-v"], timeout=3600)
        return result.returncode == 0
    except Exception as e:
        print(f"Error running pytest: {e}")
        return False


if __name__ == "__main__":
    if len(sys.argv) > 1:
        command = sys.argv[1]

        if command == "pytest":
            success = run_pytest()
        elif command in TEST_MAP:
            success = run_specific_test(command)
        else:
            print(f"Usage: {sys.argv[0]} [pytest|{'|'.join(TEST_MAP)}]")
            sys.exit(1)
    else:
        success = run_test_suite()

    sys.exit(0 if success else 1)
