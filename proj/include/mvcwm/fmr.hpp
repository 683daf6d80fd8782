#pragma once

#include "mvcwm/ecm.hpp"
#include "mvcwm/model.hpp"

namespace mvcwm {

/// Finite mixture of matrix-variate regressions: only f(Y | X) enters the
/// mixture weights. Runs on the CWM engine with the covariate block disabled.
struct FmrSpec {
    Family response_family = Family::Normal;
    int G = 1;
    int p = 1;
    int q = 1;
    int r = 1;
};

[[nodiscard]] ModelSpec to_model_spec(const FmrSpec& spec);

/// As fit(), with components ordered by B(0,0).
[[nodiscard]] FitResult fit_fmr(const ThreeWayData& data, const FmrSpec& spec,
                                const FitControls& controls = {});

}  // namespace mvcwm
