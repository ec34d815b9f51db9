#include "actuate/steer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "actuate/errors.hpp"

namespace actuate {

void validate_target(const TargetInterval& target) {
    if (std::isnan(target.zeta_min) || std::isnan(target.zeta_max)) {
        throw ConfigError("target interval: bounds must not be NaN");
    }
    if (!(target.zeta_min <= target.zeta_max)) {
        throw ConfigError("target interval: zeta_min (" + format_double(target.zeta_min) +
                          ") exceeds zeta_max (" + format_double(target.zeta_max) + ")");
    }
    if (std::isinf(target.zeta_min) && std::isinf(target.zeta_max)) {
        throw ConfigError("target interval: both bounds infinite constrains nothing");
    }
}

TargetInterval physical_to_normalized(const FeatureSpec& spec, double phys_min, double phys_max) {
    if (std::isnan(phys_min) || std::isnan(phys_max) || !(phys_min <= phys_max)) {
        throw ConfigError("target for '" + spec.feature_id + "': invalid physical bounds");
    }
    constexpr double inf = std::numeric_limits<double>::infinity();
    TargetInterval t;
    if (spec.kind == FeatureKind::Binary) {
        // Probabilities map to the logit scale the linear observation lives on.
        if (phys_min < 0.0 || phys_max > 1.0) {
            throw ConfigError("target for '" + spec.feature_id +
                              "': binary bounds must lie in [0, 1]");
        }
        t.zeta_min = phys_min <= 0.0 ? -inf : std::log(phys_min / (1.0 - phys_min));
        t.zeta_max = phys_max >= 1.0 ? inf : std::log(phys_max / (1.0 - phys_max));
    } else {
        t.zeta_min = std::isinf(phys_min) ? -inf : spec.normalize(phys_min);
        t.zeta_max = std::isinf(phys_max) ? inf : spec.normalize(phys_max);
    }
    validate_target(t);
    return t;
}

namespace {

double weight_norm_or_throw(const Observer& obs, const char* who) {
    const double nrm = l2_norm(obs.w);
    if (nrm == 0.0) {
        throw NumericalError(std::string(who) + ": observer '" + obs.feature.feature_id +
                             "' has zero weight vector (unobservable direction)");
    }
    return nrm;
}

}  // namespace

Intervention minimal_intervention(const Observer& obs, const Vector& x,
                                  const TargetInterval& target) {
    validate_target(target);
    const double nrm = weight_norm_or_throw(obs, "minimal_intervention");
    if (x.size() != obs.w.size()) {
        throw ConfigError("minimal_intervention: activation dimension mismatch");
    }

    Intervention iv;
    iv.layer = obs.layer;
    iv.pre_zeta = dot(obs.w, x) + obs.b;

    double gap = 0.0;
    if (iv.pre_zeta > target.zeta_max) {
        gap = target.zeta_max - iv.pre_zeta;
    } else if (iv.pre_zeta < target.zeta_min) {
        gap = target.zeta_min - iv.pre_zeta;
    }

    if (gap == 0.0) {
        iv.u.assign(x.size(), 0.0);
        iv.post_zeta = iv.pre_zeta;
        iv.active = false;
        return iv;
    }

    const double scale = gap / (nrm * nrm);
    iv.u.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) iv.u[i] = scale * obs.w[i];

    double post = obs.b;
    for (std::size_t i = 0; i < x.size(); ++i) post += obs.w[i] * (x[i] + iv.u[i]);
    iv.post_zeta = post;
    iv.active = true;
    return iv;
}

Vector projection_oracle(const Observer& obs, const Vector& x, const TargetInterval& target) {
    validate_target(target);
    const double nrm = weight_norm_or_throw(obs, "projection_oracle");
    const double inv_sq = 1.0 / (nrm * nrm);
    const double zeta = dot(obs.w, x) + obs.b;
    const double lo = target.zeta_min - zeta;  // feasible w'u range
    const double hi = target.zeta_max - zeta;

    // Shrink-then-project iteration for the least-norm point of the slab
    // {u : w'u in [lo, hi]}. A raw gradient step of length 1/||w||^2
    // overshoots when ||w|| is small, so the pull toward zero is damped; the
    // projection itself is exact, and the contraction settles well within
    // the iteration budget.
    constexpr int kIters = 10000;
    constexpr double kShrink = 0.9;
    Vector u(x.size(), 0.0);
    for (int it = 0; it < kIters; ++it) {
        for (double& v : u) v *= kShrink;
        const double s = dot(obs.w, u);
        const double c = std::min(std::max(s, lo), hi);
        if (c != s) {
            const double adj = (c - s) * inv_sq;
            for (std::size_t i = 0; i < u.size(); ++i) u[i] += adj * obs.w[i];
        }
    }
    return u;
}

Vector fixed_offset(const Observer& obs, const Vector& x, double alpha) {
    const double nrm = weight_norm_or_throw(obs, "fixed_offset");
    (void)x;  // the offset is state-independent by design
    Vector u(obs.w.size());
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = alpha * obs.w[i] / nrm;
    return u;
}

}  // namespace actuate
