#pragma once

// Every numeric tolerance used by the library lives here.

namespace xsec::tol {

// Softmax outputs must sum to 1 within this.
inline constexpr double kSoftmaxSum = 1e-12;

// Analytic gradients vs central finite differences, relative.
inline constexpr double kGradRel = 1e-4;

// DeepLIFT rescale multiplier falls back to the activation derivative
// when |delta pre-activation| is below this.
inline constexpr double kRescaleDelta = 1e-10;

// DeepLIFT summation-to-delta and KernelSHAP efficiency budget.
inline constexpr double kAxiomAbs = 1e-6;

// Integrated-gradients completeness residual scale at m = 512.
inline constexpr double kIgResidualScale = 1e-3;

// LIME ridge regularizer.
inline constexpr double kRidgeLambda = 1e-3;

// Floors used by relative-output-stability denominators.
inline constexpr double kStabilityFloor = 1e-8;

} // namespace xsec::tol
