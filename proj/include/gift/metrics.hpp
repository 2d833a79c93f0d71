// Stage 4 estimators over outcome tables: directed information, CaCE, PNS,
// PN, PS and the interventional lower bound.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "gift/classifier.hpp"

namespace gift {

// One validation input: whether the concept is present, the model's label on
// the input, and its label after the concept was removed (present) or added
// (absent).
struct OutcomeRow {
  bool presence = false;
  ClassLabel y_base = ClassLabel::Zero;
  ClassLabel y_flipped = ClassLabel::Zero;
};

using OutcomeTable = std::vector<OutcomeRow>;

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DiEstimate {
  double value = 0.0;
  bool degenerate = false;  // H(c) = 0
};

// I(c; y) / H(c) from the empirical joint distribution; presence is 0/1.
DiEstimate directed_information(std::span<const std::uint8_t> presence, std::span<const ClassLabel> labels);

// Individual causal effect of one row, in {-1, 0, 1}.
int ice(const OutcomeRow& row);

double cace(std::span<const OutcomeRow> table);
double pns_hat(std::span<const OutcomeRow> table, ClassLabel y);

struct GuardedRate {
  double value = 0.0;
  bool zero_denominator = false;
};

GuardedRate pn_hat(std::span<const OutcomeRow> table, ClassLabel y);
GuardedRate ps_hat(std::span<const OutcomeRow> table, ClassLabel y);

// Weights of pn_hat and ps_hat in pns_hat: the shares of the table that enter
// each conditional frequency's denominator.
struct PnsWeights {
  double w_pn = 0.0;
  double w_ps = 0.0;
};
PnsWeights pns_weights(std::span<const OutcomeRow> table, ClassLabel y);

double interventional_bound(std::span<const OutcomeRow> table, ClassLabel y);

struct MetricReport {
  double di = 0.0;
  bool di_degenerate = false;
  double cace = 0.0;
  double pns_y1 = 0.0;
  double pns_y0 = 0.0;
  double pn_y1 = 0.0;
  double ps_y1 = 0.0;
  double pn_y0 = 0.0;
  double ps_y0 = 0.0;
  double bound_y1 = 0.0;
  double bound_y0 = 0.0;
  bool pn_y1_zero_denominator = false;
  bool ps_y1_zero_denominator = false;
  bool pn_y0_zero_denominator = false;
  bool ps_y0_zero_denominator = false;
  std::size_t n_rows = 0;
  std::size_t n_present = 0;
  std::size_t n_absent = 0;
  std::size_t n_dropped = 0;

  json to_json() const;
  static MetricReport from_json(const json& j);
};

// Causal fields from the table; DI fields are filled by the caller since DI
// is measured on the partition, not on intervention outcomes.
MetricReport causal_report(std::span<const OutcomeRow> table);

}  // namespace gift
