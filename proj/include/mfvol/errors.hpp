#pragma once

#include <stdexcept>
#include <string>

namespace mfvol {

/// A covariance or (negative) Hessian that should be positive definite is not.
class NotPositiveDefinite : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mode finding stopped before the gradient tolerance was reached.
class ModeNotConverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The stationary point found for the latent field is not a maximum.
class SaddlePoint : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace mfvol
