#include "gasp/metrics.hpp"

namespace gasp {

void Confusion::add(Label gold, std::optional<Label> predicted) {
  if (!predicted) {
    ++parse_failures;
    (gold == Label::manipulated ? fn : fp)++;
    return;
  }
  if (gold == Label::manipulated) {
    (*predicted == Label::manipulated ? tp : fn)++;
  } else {
    (*predicted == Label::manipulated ? fp : tn)++;
  }
}

Confusion& Confusion::operator+=(const Confusion& other) {
  tp += other.tp;
  fp += other.fp;
  tn += other.tn;
  fn += other.fn;
  parse_failures += other.parse_failures;
  return *this;
}

double Confusion::accuracy_pct() const noexcept {
  const auto n = total();
  return n == 0 ? 0.0 : 100.0 * static_cast<double>(correct()) / static_cast<double>(n);
}

double Confusion::f1_pct() const noexcept {
  const auto denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 100.0 * static_cast<double>(2 * tp) / static_cast<double>(denom);
}

}  // namespace gasp
