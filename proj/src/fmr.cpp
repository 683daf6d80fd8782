#include "mvcwm/fmr.hpp"

namespace mvcwm {

ModelSpec to_model_spec(const FmrSpec& spec) {
    ModelSpec out;
    out.covariate_family = Family::Normal;
    out.response_family = spec.response_family;
    out.G = spec.G;
    out.p = spec.p;
    out.q = spec.q;
    out.r = spec.r;
    out.fmr = true;
    return out;
}

FitResult fit_fmr(const ThreeWayData& data, const FmrSpec& spec, const FitControls& controls) {
    return fit(data, to_model_spec(spec), controls);
}

}  // namespace mvcwm
