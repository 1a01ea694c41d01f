#!/usr/bin/env python3
"""
Mode fit of the floating denoiser

Samples from the trained floating model must land within three mode spreads
of some mixture center at least 95% of the time, and cover all eight modes.
"""

from calibration.calibration_system import evaluate_quality
from experiment_suite import ExperimentSuite, main_for, median

MIN_IN_MODE = 0.95


class FloatingFitSuite(ExperimentSuite):
    title = "Floating model mode fit"

    def run_checks(self):
        print("\n🔧 Sampling floating models")
        print("-" * 40)
        reports = []
        for seed in self.seeds:
            fp, data, s = self.trained(seed)
            report = evaluate_quality(fp, data, s, self.calib_config(seed))
            reports.append(report)
            print(f"  seed {seed}: in-mode {report.in_mode_fraction:.3f}, "
                  f"{report.modes_covered}/{report.mode_count} modes, swd {report.swd:.5f}")

        print("\n🔍 Checking fit")
        print("-" * 40)
        in_mode = median([r.in_mode_fraction for r in reports])
        covered = min(r.modes_covered for r in reports)
        self.log_result(f"At least {MIN_IN_MODE:.0%} of samples within 3 spreads of a mode",
                        in_mode >= MIN_IN_MODE, f"median {in_mode:.3f}")
        self.log_result("Every mode covered", covered == reports[0].mode_count, f"min {covered}")


if __name__ == "__main__":
    main_for(FloatingFitSuite)
