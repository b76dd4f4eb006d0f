#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "perfest/dataset.hpp"
#include "perfest/errors.hpp"
#include "perfest/estimators.hpp"
#include "perfest/learners.hpp"
#include "perfest/rng.hpp"

namespace perfest {

// Gaussian features with a logistic concept. Covariate shift (per-feature mean
// offsets and scale multipliers), the concept, and score miscalibration
// (temperature on the true logit) are independently controllable; the label
// distribution given the inputs is identical across roles by construction.
struct ShiftSpec {
    std::size_t n_features = 2;
    std::vector<double> ref_mean;   // per feature; defaults to 0
    std::vector<double> ref_std;    // per feature; defaults to 1
    std::vector<double> shift;      // production mean offsets; defaults to 0
    std::vector<double> scale;      // production std multipliers; defaults to 1
    std::vector<double> concept_coef;  // logistic coefficients of the true concept
    double concept_intercept = 0.0;
    // Monitored model's internal coefficients. Empty means the model matches the
    // concept exactly; setting them (e.g. zeroing one entry) makes the score an
    // imperfect summary of the inputs, so covariate shift can change P(y|score).
    std::vector<double> model_coef;
    double model_intercept = 0.0;  // read only when model_coef is set
    double temperature = 1.0;      // tau; scores are sigmoid(model_logit / tau)
    std::size_t n_ref = 10000;
    std::size_t n_prod = 20000;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_features < 1) throw ValidationError("n_features must be >= 1");
        if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
        if (n_ref < 1 || n_prod < 1) throw ValidationError("n_ref and n_prod must be >= 1");
        auto check_len = [&](const std::vector<double>& v, const char* name) {
            if (!v.empty() && v.size() != n_features)
                throw ValidationError(std::string(name) + " length must equal n_features");
        };
        check_len(ref_mean, "ref_mean");
        check_len(ref_std, "ref_std");
        check_len(shift, "shift");
        check_len(scale, "scale");
        check_len(concept_coef, "concept_coef");
        check_len(model_coef, "model_coef");
        for (double s : ref_std)
            if (!(s > 0.0)) throw ValidationError("ref_std entries must be positive");
        for (double s : scale)
            if (!(s > 0.0)) throw ValidationError("scale entries must be positive");
    }

    double mean_at(std::size_t j, Role role) const {
        const double base = ref_mean.empty() ? 0.0 : ref_mean[j];
        if (role == Role::reference || shift.empty()) return base;
        return base + shift[j];
    }
    double std_at(std::size_t j, Role role) const {
        const double base = ref_std.empty() ? 1.0 : ref_std[j];
        if (role == Role::reference || scale.empty()) return base;
        return base * scale[j];
    }
    double coef_at(std::size_t j) const { return concept_coef.empty() ? 1.0 : concept_coef[j]; }

    bool model_matches_concept() const { return model_coef.empty(); }
    double model_coef_at(std::size_t j) const {
        return model_matches_concept() ? coef_at(j) : model_coef[j];
    }
    double model_intercept_value() const {
        return model_matches_concept() ? concept_intercept : model_intercept;
    }
};

// Exact conditional label probabilities for generated data. When the monitored
// model matches the concept, the calibration map from scores back to
// probabilities is closed-form: c*(s) = sigmoid(tau * logit(s)); with a
// misspecified model only the per-row probabilities apply.
struct SyntheticOracle {
    double temperature = 1.0;
    bool score_determines_probability = true;
    std::vector<double> reference_true_prob;
    std::vector<double> production_true_prob;

    double true_prob_from_score(double s) const {
        if (!score_determines_probability)
            throw ValidationError("no closed-form calibration map for a misspecified model");
        const double logit = std::log(s / (1.0 - s));
        return sigmoid(temperature * logit);
    }
};

struct SyntheticPair {
    ScoredDataset reference;
    ScoredDataset production;
    SyntheticOracle oracle;
};

namespace detail {

inline ScoredDataset generate_role(const ShiftSpec& spec, Role role, std::size_t n,
                                   std::uint64_t feature_stream, std::uint64_t label_stream,
                                   std::vector<double>& true_prob_out) {
    Rng feat_rng(derive_seed(spec.seed, feature_stream));
    Rng label_rng(derive_seed(spec.seed, label_stream));

    ScoredDataset ds;
    ds.role = role;
    ds.features = Matrix(n, spec.n_features);
    ds.scores.resize(n);
    ds.predictions.resize(n);
    ds.labels = std::vector<int>(n);
    true_prob_out.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        double concept_logit = spec.concept_intercept;
        double model_logit = spec.model_intercept_value();
        for (std::size_t j = 0; j < spec.n_features; ++j) {
            const double x = feat_rng.normal(spec.mean_at(j, role), spec.std_at(j, role));
            ds.features(i, j) = x;
            concept_logit += spec.coef_at(j) * x;
            model_logit += spec.model_coef_at(j) * x;
        }
        const double p = sigmoid(concept_logit);
        true_prob_out[i] = p;
        ds.scores[i] = sigmoid(model_logit / spec.temperature);
        ds.predictions[i] = ds.scores[i] >= 0.5 ? 1 : 0;
        (*ds.labels)[i] = label_rng.bernoulli(p) ? 1 : 0;
    }
    return ds;
}

}  // namespace detail

inline SyntheticPair generate(const ShiftSpec& spec) {
    spec.validate();
    SyntheticPair pair;
    pair.oracle.temperature = spec.temperature;
    pair.oracle.score_determines_probability = spec.model_matches_concept();
    pair.reference = detail::generate_role(spec, Role::reference, spec.n_ref, 1, 2,
                                           pair.oracle.reference_true_prob);
    pair.production = detail::generate_role(spec, Role::production, spec.n_prod, 3, 4,
                                            pair.oracle.production_true_prob);
    return pair;
}

struct TruePerformance {
    double value = 0.0;
    double mc_se = 0.0;
};

// Monte-Carlo population metric of the spec's monitored model on the production
// distribution. Confusion rates are taken as conditional expectations given the
// inputs, so no label noise enters; the standard error comes from batch means.
inline TruePerformance true_performance(const ShiftSpec& spec, MetricKind kind,
                                        std::size_t n_mc = 100000, std::uint64_t seed = 1) {
    spec.validate();
    if (n_mc < 10000) throw ValidationError("n_mc must be at least 10^4");

    Rng rng(derive_seed(spec.seed, derive_seed(seed, 0x7275ULL)));
    std::vector<double> true_p(n_mc), scores(n_mc);
    std::vector<int> preds(n_mc);
    for (std::size_t i = 0; i < n_mc; ++i) {
        double concept_logit = spec.concept_intercept;
        double model_logit = spec.model_intercept_value();
        for (std::size_t j = 0; j < spec.n_features; ++j) {
            const double x = rng.normal(spec.mean_at(j, Role::production),
                                        spec.std_at(j, Role::production));
            concept_logit += spec.coef_at(j) * x;
            model_logit += spec.model_coef_at(j) * x;
        }
        true_p[i] = sigmoid(concept_logit);
        scores[i] = sigmoid(model_logit / spec.temperature);
        preds[i] = scores[i] >= 0.5 ? 1 : 0;
    }

    auto metric_on = [&](std::size_t lo, std::size_t hi) {
        const std::span<const double> p(true_p.data() + lo, hi - lo);
        const std::span<const int> g(preds.data() + lo, hi - lo);
        const std::span<const double> s(scores.data() + lo, hi - lo);
        if (kind == MetricKind::auroc) return estimate_auroc(p, s);
        return expectation_estimate(kind, p, g, s);
    };

    TruePerformance out;
    out.value = metric_on(0, n_mc);

    const std::size_t n_batches = 20;
    const std::size_t batch = n_mc / n_batches;
    std::vector<double> batch_values;
    for (std::size_t b = 0; b < n_batches; ++b) {
        try {
            batch_values.push_back(metric_on(b * batch, (b + 1) * batch));
        } catch (const Error&) {
        }
    }
    if (batch_values.size() >= 2) {
        double mean = 0.0;
        for (double v : batch_values) mean += v;
        mean /= static_cast<double>(batch_values.size());
        double var = 0.0;
        for (double v : batch_values) var += (v - mean) * (v - mean);
        var /= static_cast<double>(batch_values.size() - 1);
        out.mc_se = std::sqrt(var / static_cast<double>(batch_values.size()));
    }
    return out;
}

// Column layout used when synthetic pairs are persisted as CSV.
inline DatasetSchema synthetic_schema(std::size_t n_features) {
    DatasetSchema schema;
    for (std::size_t j = 0; j < n_features; ++j)
        schema.feature_columns.push_back("f" + std::to_string(j + 1));
    schema.score_column = "score";
    schema.prediction_column = "prediction";
    schema.label_column = "label";
    return schema;
}

}  // namespace perfest
