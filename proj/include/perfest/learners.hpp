#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "perfest/errors.hpp"
#include "perfest/matrix.hpp"

namespace perfest {

inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// log(1 + exp(t)) without overflow.
inline double log1p_exp(double t) {
    return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
}

struct LogisticConfig {
    int max_iter = 200;
    double tol = 1e-8;      // on the gradient max-norm of the mean weighted loss
    double ridge = 1e-4;    // L2 penalty on coefficients of standardized features
    double prob_floor = 1e-6;
};

namespace detail {

// Cholesky solve of A x = b for symmetric positive definite A (row-major, n x n).
// Adds a small diagonal jitter and retries if the decomposition fails.
inline std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b,
                                     std::size_t n) {
    for (int attempt = 0; attempt < 4; ++attempt) {
        std::vector<double> l(n * n, 0.0);
        bool ok = true;
        for (std::size_t i = 0; i < n && ok; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                double sum = a[i * n + j];
                for (std::size_t k = 0; k < j; ++k) sum -= l[i * n + k] * l[j * n + k];
                if (i == j) {
                    if (sum <= 0.0) {
                        ok = false;
                        break;
                    }
                    l[i * n + i] = std::sqrt(sum);
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        if (!ok) {
            const double jitter = 1e-10 * std::pow(10.0, attempt);
            for (std::size_t i = 0; i < n; ++i) a[i * n + i] += jitter * (1.0 + a[i * n + i]);
            continue;
        }
        // forward then backward substitution
        std::vector<double> y(n), x(n);
        for (std::size_t i = 0; i < n; ++i) {
            double sum = b[i];
            for (std::size_t k = 0; k < i; ++k) sum -= l[i * n + k] * y[k];
            y[i] = sum / l[i * n + i];
        }
        for (std::size_t ii = n; ii-- > 0;) {
            double sum = y[ii];
            for (std::size_t k = ii + 1; k < n; ++k) sum -= l[k * n + ii] * x[k];
            x[ii] = sum / l[ii * n + ii];
        }
        return x;
    }
    throw SingularFitError("normal equations are not positive definite");
}

}  // namespace detail

// Weighted L2-regularized logistic regression fitted by Newton iterations on
// standardized features. Deterministic: zero-initialized coefficients, no
// stochastic steps.
class ProbClassifier {
  public:
    std::size_t n_features() const { return coef_.size(); }
    const std::vector<double>& coef() const { return coef_; }
    double intercept() const { return intercept_; }
    const std::vector<double>& feature_mean() const { return mean_; }
    const std::vector<double>& feature_std() const { return std_; }
    const LogisticConfig& config() const { return cfg_; }
    double gradient_max_norm() const { return grad_norm_; }
    int iterations() const { return iters_; }

    // Linear score on the standardized input, before the logistic map.
    double decision_value(std::span<const double> x) const {
        if (x.size() != coef_.size()) throw ValidationError("feature count mismatch");
        double t = intercept_;
        for (std::size_t j = 0; j < coef_.size(); ++j)
            t += coef_[j] * (x[j] - mean_[j]) / std_[j];
        return t;
    }

    // Probabilities clipped to [prob_floor, 1 - prob_floor].
    std::vector<double> predict_proba(MatrixView x) const {
        if (x.cols() != coef_.size()) throw ValidationError("feature count mismatch");
        std::vector<double> p(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i) {
            const double raw = sigmoid(decision_value(x.row(i)));
            p[i] = std::clamp(raw, cfg_.prob_floor, 1.0 - cfg_.prob_floor);
        }
        return p;
    }

    friend ProbClassifier fit_prob_classifier(MatrixView, std::span<const int>,
                                              std::span<const double>, const LogisticConfig&);

  private:
    std::vector<double> mean_, std_;
    std::vector<double> coef_;
    double intercept_ = 0.0;
    LogisticConfig cfg_;
    double grad_norm_ = 0.0;
    int iters_ = 0;
};

// Minimizes  sum_i w_i * logloss_i / sum_i w_i  +  ridge/2 * |coef|^2.
// Weights may be omitted (empty span) for the unweighted fit.
inline ProbClassifier fit_prob_classifier(MatrixView x, std::span<const int> y,
                                          std::span<const double> weights = {},
                                          const LogisticConfig& cfg = {}) {
    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    if (n == 0) throw ValidationError("empty training data");
    if (y.size() != n) throw ValidationError("target length mismatch");
    if (!weights.empty() && weights.size() != n) throw ValidationError("weight length mismatch");

    std::vector<double> w(n, 1.0);
    if (!weights.empty()) std::copy(weights.begin(), weights.end(), w.begin());

    double w_sum = 0.0, w_pos = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(w[i] >= 0.0) || !std::isfinite(w[i]))
            throw ValidationError("weights must be finite and nonnegative");
        if (y[i] != 0 && y[i] != 1) throw ValidationError("targets must be 0 or 1");
        w_sum += w[i];
        if (y[i] == 1) w_pos += w[i];
    }
    if (!(w_sum > 0.0)) throw ValidationError("weights sum to zero");
    if (w_pos <= 0.0 || w_pos >= w_sum)
        throw DegenerateTargetError("targets carry weight in a single class only");

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j)
            if (!std::isfinite(x(i, j))) throw ValidationError("non-finite feature value");

    ProbClassifier model;
    model.cfg_ = cfg;

    // Weighted standardization (population form), so that a row with weight r
    // behaves exactly like r replicated unit-weight rows.
    model.mean_.assign(p, 0.0);
    model.std_.assign(p, 1.0);
    for (std::size_t j = 0; j < p; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += w[i] * x(i, j);
        m /= w_sum;
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = x(i, j) - m;
            var += w[i] * d * d;
        }
        var /= w_sum;
        model.mean_[j] = m;
        model.std_[j] = var > 0.0 ? std::sqrt(var) : 1.0;
    }

    Matrix xs(n, p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j)
            xs(i, j) = (x(i, j) - model.mean_[j]) / model.std_[j];

    const std::size_t d = p + 1;  // intercept first
    std::vector<double> beta(d, 0.0);
    beta[0] = std::log(w_pos / (w_sum - w_pos));

    std::vector<double> eta(n), prob(n), grad(d), hess(d * d);

    auto compute_eta = [&](const std::vector<double>& b) {
        for (std::size_t i = 0; i < n; ++i) {
            double t = b[0];
            for (std::size_t j = 0; j < p; ++j) t += b[j + 1] * xs(i, j);
            eta[i] = t;
        }
    };
    auto loss_at = [&](const std::vector<double>& b) {
        compute_eta(b);
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            loss += w[i] * (log1p_exp(eta[i]) - static_cast<double>(y[i]) * eta[i]);
        loss /= w_sum;
        for (std::size_t j = 1; j < d; ++j) loss += 0.5 * cfg.ridge * b[j] * b[j];
        return loss;
    };

    double loss = loss_at(beta);
    model.iters_ = 0;
    for (int it = 0; it < cfg.max_iter; ++it) {
        for (std::size_t i = 0; i < n; ++i) prob[i] = sigmoid(eta[i]);

        std::fill(grad.begin(), grad.end(), 0.0);
        std::fill(hess.begin(), hess.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double wi = w[i] / w_sum;
            const double r = wi * (prob[i] - static_cast<double>(y[i]));
            const double h = wi * prob[i] * (1.0 - prob[i]);
            grad[0] += r;
            hess[0] += h;
            const auto row = xs.row(i);
            for (std::size_t j = 0; j < p; ++j) {
                grad[j + 1] += r * row[j];
                hess[(j + 1) * d] += h * row[j];
                for (std::size_t k = 0; k <= j; ++k)
                    hess[(j + 1) * d + (k + 1)] += h * row[j] * row[k];
            }
        }
        for (std::size_t j = 1; j < d; ++j) {
            grad[j] += cfg.ridge * beta[j];
            hess[j * d + j] += cfg.ridge;
        }
        // mirror the lower triangle
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i + 1; j < d; ++j) hess[i * d + j] = hess[j * d + i];

        double gmax = 0.0;
        for (double g : grad) gmax = std::max(gmax, std::abs(g));
        model.grad_norm_ = gmax;
        if (gmax <= cfg.tol) break;

        const std::vector<double> step = detail::solve_spd(hess, grad, d);

        double scale = 1.0;
        std::vector<double> candidate(d);
        for (int halving = 0; halving < 40; ++halving) {
            for (std::size_t j = 0; j < d; ++j) candidate[j] = beta[j] - scale * step[j];
            const double cand_loss = loss_at(candidate);
            if (cand_loss <= loss + 1e-14) {
                beta = candidate;
                loss = cand_loss;
                break;
            }
            scale *= 0.5;
        }
        compute_eta(beta);
        model.iters_ = it + 1;
    }

    model.intercept_ = beta[0];
    model.coef_.assign(beta.begin() + 1, beta.end());
    return model;
}

// Non-decreasing piecewise-linear map over [0,1], fitted by weighted isotonic
// regression (pool-adjacent-violators). Evaluation clamps to the boundary
// fitted values outside the breakpoint range.
class MonotoneMap {
  public:
    MonotoneMap() = default;
    MonotoneMap(std::vector<double> breakpoints, std::vector<double> values)
        : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
        if (breakpoints_.empty() || breakpoints_.size() != values_.size())
            throw ValidationError("monotone map needs matching breakpoints and values");
    }

    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const std::vector<double>& values() const { return values_; }

    double value(double s) const {
        if (s <= breakpoints_.front()) return values_.front();
        if (s >= breakpoints_.back()) return values_.back();
        const auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), s);
        const std::size_t hi = static_cast<std::size_t>(it - breakpoints_.begin());
        if (breakpoints_[hi] == s) return values_[hi];
        const std::size_t lo = hi - 1;
        const double t = (s - breakpoints_[lo]) / (breakpoints_[hi] - breakpoints_[lo]);
        return values_[lo] + t * (values_[hi] - values_[lo]);
    }

    bool non_decreasing() const {
        for (std::size_t i = 1; i < values_.size(); ++i)
            if (values_[i] < values_[i - 1]) return false;
        return true;
    }

  private:
    std::vector<double> breakpoints_;
    std::vector<double> values_;
};

// Weighted isotonic regression of y on s. Rows with zero weight carry no
// information and are dropped before pooling.
inline MonotoneMap fit_monotone_map(std::span<const double> s, std::span<const int> y,
                                    std::span<const double> weights) {
    const std::size_t n = s.size();
    if (n == 0) throw ValidationError("empty input");
    if (y.size() != n || weights.size() != n) throw ValidationError("input length mismatch");
    double w_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(s[i] >= 0.0 && s[i] <= 1.0)) throw ValidationError("score outside [0,1]");
        if (y[i] != 0 && y[i] != 1) throw ValidationError("targets must be 0 or 1");
        if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
            throw ValidationError("weights must be finite and nonnegative");
        w_sum += weights[i];
    }
    if (!(w_sum > 0.0)) throw ValidationError("weights sum to zero");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] < s[b]; });

    // Aggregate ties to one group per distinct score.
    std::vector<double> score_of;   // per group
    std::vector<double> mean_of;    // weighted mean of y
    std::vector<double> weight_of;  // total weight
    for (std::size_t k = 0; k < n;) {
        std::size_t j = k;
        double wsum = 0.0, wy = 0.0;
        while (j < n && s[order[j]] == s[order[k]]) {
            wsum += weights[order[j]];
            wy += weights[order[j]] * y[order[j]];
            ++j;
        }
        if (wsum > 0.0) {
            score_of.push_back(s[order[k]]);
            mean_of.push_back(wy / wsum);
            weight_of.push_back(wsum);
        }
        k = j;
    }

    // Pool adjacent violators over the distinct-score groups.
    struct Block {
        double mean, weight;
        std::size_t count;
    };
    std::vector<Block> blocks;
    blocks.reserve(score_of.size());
    for (std::size_t g = 0; g < score_of.size(); ++g) {
        Block b{mean_of[g], weight_of[g], 1};
        while (!blocks.empty() && blocks.back().mean > b.mean) {
            const Block& prev = blocks.back();
            const double w_total = prev.weight + b.weight;
            b.mean = (prev.mean * prev.weight + b.mean * b.weight) / w_total;
            b.weight = w_total;
            b.count += prev.count;
            blocks.pop_back();
        }
        blocks.push_back(b);
    }

    std::vector<double> values(score_of.size());
    std::size_t pos = 0;
    for (const Block& b : blocks) {
        const double v = std::clamp(b.mean, 0.0, 1.0);
        for (std::size_t r = 0; r < b.count; ++r) values[pos++] = v;
    }
    return MonotoneMap(std::move(score_of), std::move(values));
}

struct LinearModel {
    double slope = 0.0;
    double intercept = 0.0;

    double at(double u) const { return slope * u + intercept; }
};

// Ordinary least squares line fit.
inline LinearModel fit_line(std::span<const double> u, std::span<const double> v) {
    const std::size_t n = u.size();
    if (n < 2 || v.size() != n) throw ValidationError("fit_line needs two equal-length inputs");
    double mu = 0.0, mv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mu += u[i];
        mv += v[i];
    }
    mu /= static_cast<double>(n);
    mv /= static_cast<double>(n);
    double suu = 0.0, suv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        suu += (u[i] - mu) * (u[i] - mu);
        suv += (u[i] - mu) * (v[i] - mv);
    }
    if (suu == 0.0) throw SingularFitError("regressor is constant");
    LinearModel m;
    m.slope = suv / suu;
    m.intercept = mv - m.slope * mu;
    if (!std::isfinite(m.slope) || !std::isfinite(m.intercept))
        throw SingularFitError("non-finite line fit");
    return m;
}

}  // namespace perfest
