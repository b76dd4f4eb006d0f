#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "perfest/errors.hpp"
#include "perfest/learners.hpp"
#include "perfest/matrix.hpp"

namespace perfest {

struct DreConfig {
    double weight_clip = 50.0;
    // Production rows with discriminator probability above this threshold sit in a
    // region the reference data barely covers.
    double coverage_prob_threshold = 0.99;
    double coverage_warn_fraction = 0.01;
    LogisticConfig logistic;
};

// w = (n_ref / n_prod) * p / (1 - p), capped at weight_clip.
inline double density_ratio_weight(double p, std::size_t n_ref, std::size_t n_prod,
                                   double weight_clip) {
    const double ratio = static_cast<double>(n_ref) / static_cast<double>(n_prod);
    return std::min(ratio * p / (1.0 - p), weight_clip);
}

// Discriminative density-ratio model: a probabilistic classifier separating
// production inputs (class 1) from reference inputs (class 0). Immutable after
// fit; weight estimation is re-entrant.
class DensityRatioModel {
  public:
    const ProbClassifier& classifier() const { return dre_; }
    std::size_t n_ref() const { return n_ref_; }
    std::size_t n_prod() const { return n_prod_; }
    double weight_clip() const { return cfg_.weight_clip; }

    // Fraction of production rows whose discriminator probability exceeded the
    // coverage threshold at fit time.
    double uncovered_fraction() const { return uncovered_fraction_; }
    bool coverage_warning() const { return coverage_warning_; }

    std::vector<double> estimate_weights(MatrixView x) const {
        std::vector<double> w = dre_.predict_proba(x);
        for (double& v : w) v = density_ratio_weight(v, n_ref_, n_prod_, cfg_.weight_clip);
        return w;
    }

    double clipped_fraction(std::span<const double> weights) const {
        if (weights.empty()) return 0.0;
        std::size_t clipped = 0;
        for (double w : weights)
            if (w >= cfg_.weight_clip) ++clipped;
        return static_cast<double>(clipped) / static_cast<double>(weights.size());
    }

    friend DensityRatioModel fit_dre(MatrixView, MatrixView, std::uint64_t, const DreConfig&);

  private:
    ProbClassifier dre_;
    std::size_t n_ref_ = 0, n_prod_ = 0;
    DreConfig cfg_;
    double uncovered_fraction_ = 0.0;
    bool coverage_warning_ = false;
};

// Two-sample discrimination fit: reference rows labeled 0, production rows
// labeled 1, one classifier on the concatenation. The logistic learner has no
// stochastic steps; the seed parameter keeps the call deterministic-by-contract
// if a randomized learner is substituted.
inline DensityRatioModel fit_dre(MatrixView x_ref, MatrixView x_prod,
                                 std::uint64_t /*seed*/ = 0, const DreConfig& cfg = {}) {
    if (x_ref.rows() == 0 || x_prod.rows() == 0)
        throw ValidationError("both samples must be non-empty");
    if (x_ref.cols() != x_prod.cols())
        throw ValidationError("reference and production feature counts differ");

    const Matrix stacked = concat_rows(x_ref, x_prod);
    std::vector<int> z(stacked.rows(), 0);
    std::fill(z.begin() + static_cast<std::ptrdiff_t>(x_ref.rows()), z.end(), 1);

    DensityRatioModel model;
    model.cfg_ = cfg;
    model.n_ref_ = x_ref.rows();
    model.n_prod_ = x_prod.rows();
    model.dre_ = fit_prob_classifier(stacked.view(), z, {}, cfg.logistic);

    const std::vector<double> p_prod = model.dre_.predict_proba(x_prod);
    std::size_t uncovered = 0;
    for (double p : p_prod)
        if (p > cfg.coverage_prob_threshold) ++uncovered;
    model.uncovered_fraction_ =
        static_cast<double>(uncovered) / static_cast<double>(p_prod.size());
    model.coverage_warning_ = model.uncovered_fraction_ > cfg.coverage_warn_fraction;
    return model;
}

}  // namespace perfest
