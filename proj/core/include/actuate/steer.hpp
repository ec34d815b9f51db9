#pragma once

#include "actuate/numkit.hpp"
#include "actuate/observer.hpp"

namespace actuate {

// Target interval in normalized feature units. One bound may be infinite for
// a one-sided constraint; an interval with both bounds infinite constrains
// nothing and is rejected.
struct TargetInterval {
    double zeta_min = 0.0;
    double zeta_max = 0.0;
};

void validate_target(const TargetInterval& target);

// Converts user-facing physical bounds into normalized units: the feature's
// affine normalization for continuous observers, the logit map for binary
// ones (probability 0 or 1 opens the corresponding side).
TargetInterval physical_to_normalized(const FeatureSpec& spec, double phys_min, double phys_max);

struct Intervention {
    int layer = 0;
    Vector u;
    double pre_zeta = 0.0;   // normalized units
    double post_zeta = 0.0;  // normalized units
    bool active = false;
};

// Least-norm additive steering: with zeta = w'x + b, overshoot above the
// interval pulls back along w by (zeta_max - zeta)/||w||^2, undershoot pushes
// up by (zeta_min - zeta)/||w||^2, and anything inside the closed interval
// (bounds included) is left alone.
Intervention minimal_intervention(const Observer& obs, const Vector& x,
                                  const TargetInterval& target);

// Independent numeric solver for the same least-norm problem, used to
// cross-check the closed form in tests: shrink u toward zero, then project
// the observation onto the interval, repeated 10^4 times.
Vector projection_oracle(const Observer& obs, const Vector& x, const TargetInterval& target);

// alpha * w/||w||: a fixed-size push along the observer direction, the
// non-optimal comparison used in perturbation sweeps. Independent of x.
Vector fixed_offset(const Observer& obs, const Vector& x, double alpha);

}  // namespace actuate
