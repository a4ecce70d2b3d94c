#pragma once

#include "bpre/bpre.hpp"

// Shared test models.
//   gw_half:   single state, pmf {1: 1/2, 2: 1/2} (constant environment)
//   model_2env: states A {1:.5, 2:.5} and B {1:.2, 2:.8}, equal weights
//   geo_half:  geometric offspring with b = 1/2, truncated at 1e-12
namespace fixtures {

inline const bpre::EnvironmentModel& gw_half() {
    static const bpre::EnvironmentModel model =
        bpre::build_environment({{1.0, {{1, 0.5}, {2, 0.5}}}}, "gw-half");
    return model;
}

inline const bpre::EnvironmentModel& model_2env() {
    static const bpre::EnvironmentModel model = bpre::build_environment(
        {{0.5, {{1, 0.5}, {2, 0.5}}}, {0.5, {{1, 0.2}, {2, 0.8}}}}, "model-2env");
    return model;
}

inline const bpre::EnvironmentModel& geo_half() {
    static const bpre::EnvironmentModel model =
        bpre::fractional_linear_geometric({{1.0, 0.5}}, 1e-12, "geo-half");
    return model;
}

// Kernels are expensive to build at large caps; share them across test cases.
inline const bpre::TruncatedKernel& gw_kernel_4096() {
    static const bpre::TruncatedKernel kernel = bpre::annealed_kernel(gw_half(), 4096);
    return kernel;
}

inline const bpre::TruncatedKernel& env2_kernel_4096() {
    static const bpre::TruncatedKernel kernel = bpre::annealed_kernel(model_2env(), 4096);
    return kernel;
}

}  // namespace fixtures
