#pragma once

#include <stdexcept>
#include <string>

namespace panelqboot {

// Error taxonomy. Validation errors mean the inputs violate a documented
// precondition; numerical errors mean a well-posed computation failed.
enum class errc {
  // validation
  unbalanced_panel,
  non_contiguous_time,
  non_numeric_cell,
  duplicate_observation,
  invalid_length,
  invalid_argument,
  missing_fit,
  too_few_draws,
  too_large,
  non_stationary,
  dimension_mismatch,
  invalid_weight_law,
  // numerical
  singular_design,
  no_convergence,
  all_weights_zero_for_unit,
  degenerate_density,
  singular_d,
  negative_variance,
  singular_restriction,
  bootstrap_failed,
};

constexpr bool is_validation_error(errc c) {
  switch (c) {
    case errc::unbalanced_panel:
    case errc::non_contiguous_time:
    case errc::non_numeric_cell:
    case errc::duplicate_observation:
    case errc::invalid_length:
    case errc::invalid_argument:
    case errc::missing_fit:
    case errc::too_few_draws:
    case errc::too_large:
    case errc::non_stationary:
    case errc::dimension_mismatch:
    case errc::invalid_weight_law:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  errc code() const noexcept { return code_; }
  bool is_validation() const noexcept { return is_validation_error(code_); }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace panelqboot
