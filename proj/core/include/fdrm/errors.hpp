#pragma once

#include <stdexcept>

namespace fdrm {

/// Numerical failure inside a solver (singular regression, kernel positivity
/// violation, non-finite value), as opposed to a precondition violation,
/// which is reported as std::invalid_argument.
class numerical_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace fdrm
