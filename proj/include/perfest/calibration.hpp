#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "perfest/errors.hpp"
#include "perfest/learners.hpp"

namespace perfest {

enum class CalibrationMode { weighted, unweighted };

// Monotone score-to-probability map. Weighted mode reweighs the reference data
// towards the production distribution before fitting; unweighted mode is the
// same fit with unit weights.
class Calibrator {
  public:
    Calibrator() = default;
    Calibrator(MonotoneMap map, CalibrationMode mode) : map_(std::move(map)), mode_(mode) {}

    const MonotoneMap& map() const { return map_; }
    CalibrationMode mode() const { return mode_; }

    double calibrate_one(double s) const {
        if (!(s >= 0.0 && s <= 1.0)) throw ValidationError("score outside [0,1]");
        return map_.value(s);
    }

    std::vector<double> calibrate(std::span<const double> scores) const {
        std::vector<double> out(scores.size());
        for (std::size_t i = 0; i < scores.size(); ++i) out[i] = calibrate_one(scores[i]);
        return out;
    }

  private:
    MonotoneMap map_{{0.0}, {0.0}};
    CalibrationMode mode_ = CalibrationMode::unweighted;
};

inline Calibrator fit_weighted_calibrator(std::span<const double> scores_ref,
                                          std::span<const int> y_ref,
                                          std::span<const double> weights) {
    return Calibrator(fit_monotone_map(scores_ref, y_ref, weights), CalibrationMode::weighted);
}

inline Calibrator fit_unweighted_calibrator(std::span<const double> scores_ref,
                                            std::span<const int> y_ref) {
    const std::vector<double> unit(scores_ref.size(), 1.0);
    return Calibrator(fit_monotone_map(scores_ref, y_ref, unit), CalibrationMode::unweighted);
}

// Binned calibration error. Per bin: the signed weighted mean of y - c(s) and
// the bin's share of the total weight; the expected absolute calibration error
// aggregates |bin error| by bin probability.
struct CalibrationDiagnostics {
    std::vector<double> bin_low;     // smallest score in bin
    std::vector<double> bin_high;    // largest score in bin
    std::vector<double> bin_error;   // signed calibration error per bin
    std::vector<double> bin_prob;    // weight share per bin, sums to 1
    double expected_error = 0.0;     // sum_b bin_prob * |bin_error|
};

inline CalibrationDiagnostics diagnose_calibration(const Calibrator& calibrator,
                                                   std::span<const double> scores,
                                                   std::span<const int> y,
                                                   std::span<const double> weights,
                                                   std::size_t n_bins = 10) {
    const std::size_t n = scores.size();
    if (n == 0) throw ValidationError("empty input");
    if (y.size() != n || weights.size() != n) throw ValidationError("input length mismatch");
    if (n_bins < 1) throw ValidationError("n_bins must be >= 1");
    n_bins = std::min(n_bins, n);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double total_weight = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w))
            throw ValidationError("weights must be finite and nonnegative");
        total_weight += w;
    }
    if (!(total_weight > 0.0)) throw ValidationError("weights sum to zero");

    CalibrationDiagnostics diag;
    double aggregate = 0.0;
    for (std::size_t b = 0; b < n_bins; ++b) {
        // equal-frequency split of the sorted rows
        const std::size_t lo = b * n / n_bins;
        const std::size_t hi = (b + 1) * n / n_bins;
        if (lo == hi) continue;
        double w_bin = 0.0, err = 0.0;
        for (std::size_t k = lo; k < hi; ++k) {
            const std::size_t i = order[k];
            const double resid = static_cast<double>(y[i]) - calibrator.calibrate_one(scores[i]);
            w_bin += weights[i];
            err += weights[i] * resid;
        }
        const double prob = w_bin / total_weight;
        const double signed_err = w_bin > 0.0 ? err / w_bin : 0.0;
        diag.bin_low.push_back(scores[order[lo]]);
        diag.bin_high.push_back(scores[order[hi - 1]]);
        diag.bin_error.push_back(signed_err);
        diag.bin_prob.push_back(prob);
        aggregate += prob * std::abs(signed_err);
    }
    diag.expected_error = aggregate;
    return diag;
}

}  // namespace perfest
