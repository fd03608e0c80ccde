#pragma once

#include "gasp/kb.hpp"

#include <cstddef>
#include <optional>

namespace gasp {

/// Binary confusion counts with `manipulated` as the positive class. A missing
/// prediction (parse failure) is always wrong: it lands in fn for a
/// manipulated gold label and in fp for an authentic one.
struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t parse_failures = 0;

  void add(Label gold, std::optional<Label> predicted);
  Confusion& operator+=(const Confusion& other);

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  std::size_t correct() const noexcept { return tp + tn; }
  /// Percent; 0 for an empty confusion.
  double accuracy_pct() const noexcept;
  /// Binary F1 in percent; 0 when there are no positives at all.
  double f1_pct() const noexcept;
};

}  // namespace gasp
