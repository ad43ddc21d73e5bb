#pragma once

#include <string>

#include "panelqboot/errors.hpp"

namespace panelqboot {

// Non-overlapping partition of T consecutive periods into cells of length
// cell_len, with a shorter tail cell when cell_len does not divide T. The
// tail, when present, is cell index full_cells (the "extra" cell).
struct PartitionScheme {
  int cell_len = 1;    // l
  int full_cells = 0;  // b
  int tail_len = 0;    // T - b*l, in [0, l)
  int periods = 0;     // T

  int num_cells() const { return full_cells + (tail_len > 0 ? 1 : 0); }

  // 0-based time index t in [0, T) -> 0-based (cell, position in cell).
  int cell_of(int t) const { return t / cell_len; }
  int pos_in_cell(int t) const { return t % cell_len; }

  int cell_begin(int j) const { return j * cell_len; }
  int cell_size(int j) const { return j < full_cells ? cell_len : tail_len; }
};

inline PartitionScheme make_partition(int periods, int cell_len) {
  if (cell_len < 1 || cell_len > periods) {
    fail(errc::invalid_length,
         "partition cell length must satisfy 1 <= l <= T, got l=" +
             std::to_string(cell_len) + ", T=" + std::to_string(periods));
  }
  PartitionScheme s;
  s.cell_len = cell_len;
  s.periods = periods;
  s.full_cells = periods / cell_len;
  s.tail_len = periods % cell_len;
  return s;
}

}  // namespace panelqboot
