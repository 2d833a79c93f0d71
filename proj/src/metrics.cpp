#include "gift/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace gift {
namespace {

void require_rows(std::span<const OutcomeRow> table) {
  if (table.empty()) throw MetricError("outcome table is empty");
}

double plogp_ratio(double joint, double ratio) { return joint > 0.0 ? joint * std::log(ratio) : 0.0; }

struct Counts {
  std::size_t pns = 0;       // numerator of pns_hat
  std::size_t pn_num = 0;
  std::size_t pn_den = 0;
  std::size_t ps_num = 0;
  std::size_t ps_den = 0;
  std::size_t forced_present = 0;
  std::size_t forced_absent = 0;
};

Counts count(std::span<const OutcomeRow> table, ClassLabel y) {
  Counts c;
  for (const auto& r : table) {
    const bool base_is_y = r.y_base == y;
    const bool flipped_is_y = r.y_flipped == y;
    if (r.presence) {
      if (base_is_y) {
        ++c.pn_den;
        if (!flipped_is_y) ++c.pn_num;
      }
      c.forced_present += base_is_y;
      c.forced_absent += flipped_is_y;
    } else {
      if (!base_is_y) {
        ++c.ps_den;
        if (flipped_is_y) ++c.ps_num;
      }
      c.forced_present += flipped_is_y;
      c.forced_absent += base_is_y;
    }
  }
  c.pns = c.pn_num + c.ps_num;
  return c;
}

GuardedRate guarded(std::size_t num, std::size_t den) {
  if (den == 0) return {0.0, true};
  return {static_cast<double>(num) / static_cast<double>(den), false};
}

}  // namespace

DiEstimate directed_information(std::span<const std::uint8_t> presence, std::span<const ClassLabel> labels) {
  if (presence.size() != labels.size()) throw MetricError("presence and label lengths differ");
  if (presence.empty()) throw MetricError("directed information needs at least one observation");
  std::array<std::array<double, 2>, 2> joint{};
  for (std::size_t i = 0; i < presence.size(); ++i) joint[presence[i] ? 1 : 0][to_int(labels[i])] += 1.0;
  const double n = static_cast<double>(presence.size());
  const std::array<double, 2> pc{(joint[0][0] + joint[0][1]) / n, (joint[1][0] + joint[1][1]) / n};
  const std::array<double, 2> py{(joint[0][0] + joint[1][0]) / n, (joint[0][1] + joint[1][1]) / n};
  double h = 0.0;
  for (double p : pc) h -= plogp_ratio(p, p);
  if (pc[0] == 0.0 || pc[1] == 0.0) return {0.0, true};
  double mi = 0.0;
  for (int c = 0; c < 2; ++c) {
    for (int y = 0; y < 2; ++y) {
      const double p = joint[c][y] / n;
      mi += plogp_ratio(p, p / (pc[c] * py[y]));
    }
  }
  return {std::clamp(mi / h, 0.0, 1.0), false};
}

int ice(const OutcomeRow& row) {
  const int base = to_int(row.y_base);
  const int flipped = to_int(row.y_flipped);
  return row.presence ? base - flipped : flipped - base;
}

double cace(std::span<const OutcomeRow> table) {
  require_rows(table);
  long total = 0;
  for (const auto& r : table) total += ice(r);
  return static_cast<double>(total) / static_cast<double>(table.size());
}

double pns_hat(std::span<const OutcomeRow> table, ClassLabel y) {
  require_rows(table);
  return static_cast<double>(count(table, y).pns) / static_cast<double>(table.size());
}

GuardedRate pn_hat(std::span<const OutcomeRow> table, ClassLabel y) {
  require_rows(table);
  const Counts c = count(table, y);
  return guarded(c.pn_num, c.pn_den);
}

GuardedRate ps_hat(std::span<const OutcomeRow> table, ClassLabel y) {
  require_rows(table);
  const Counts c = count(table, y);
  return guarded(c.ps_num, c.ps_den);
}

PnsWeights pns_weights(std::span<const OutcomeRow> table, ClassLabel y) {
  require_rows(table);
  const Counts c = count(table, y);
  const double n = static_cast<double>(table.size());
  return {static_cast<double>(c.pn_den) / n, static_cast<double>(c.ps_den) / n};
}

double interventional_bound(std::span<const OutcomeRow> table, ClassLabel y) {
  require_rows(table);
  const Counts c = count(table, y);
  const long diff = static_cast<long>(c.forced_present) - static_cast<long>(c.forced_absent);
  return static_cast<double>(diff) / static_cast<double>(table.size());
}

MetricReport causal_report(std::span<const OutcomeRow> table) {
  require_rows(table);
  MetricReport r;
  r.cace = cace(table);
  r.pns_y1 = pns_hat(table, ClassLabel::One);
  r.pns_y0 = pns_hat(table, ClassLabel::Zero);
  const auto pn1 = pn_hat(table, ClassLabel::One);
  const auto ps1 = ps_hat(table, ClassLabel::One);
  const auto pn0 = pn_hat(table, ClassLabel::Zero);
  const auto ps0 = ps_hat(table, ClassLabel::Zero);
  r.pn_y1 = pn1.value;
  r.ps_y1 = ps1.value;
  r.pn_y0 = pn0.value;
  r.ps_y0 = ps0.value;
  r.pn_y1_zero_denominator = pn1.zero_denominator;
  r.ps_y1_zero_denominator = ps1.zero_denominator;
  r.pn_y0_zero_denominator = pn0.zero_denominator;
  r.ps_y0_zero_denominator = ps0.zero_denominator;
  r.bound_y1 = interventional_bound(table, ClassLabel::One);
  r.bound_y0 = interventional_bound(table, ClassLabel::Zero);
  r.n_rows = table.size();
  r.n_present = static_cast<std::size_t>(
      std::count_if(table.begin(), table.end(), [](const OutcomeRow& row) { return row.presence; }));
  r.n_absent = r.n_rows - r.n_present;
  return r;
}

json MetricReport::to_json() const {
  return json{
      {"bound_y0", bound_y0},
      {"bound_y1", bound_y1},
      {"cace", cace},
      {"counts", {{"absent", n_absent}, {"dropped", n_dropped}, {"present", n_present}, {"rows", n_rows}}},
      {"di", di},
      {"flags",
       {{"di_degenerate", di_degenerate},
        {"pn_y0_zero_denominator", pn_y0_zero_denominator},
        {"pn_y1_zero_denominator", pn_y1_zero_denominator},
        {"ps_y0_zero_denominator", ps_y0_zero_denominator},
        {"ps_y1_zero_denominator", ps_y1_zero_denominator}}},
      {"pn_y0", pn_y0},
      {"pn_y1", pn_y1},
      {"pns_y0", pns_y0},
      {"pns_y1", pns_y1},
      {"ps_y0", ps_y0},
      {"ps_y1", ps_y1},
  };
}

MetricReport MetricReport::from_json(const json& j) {
  MetricReport r;
  r.di = j.at("di").get<double>();
  r.cace = j.at("cace").get<double>();
  r.pns_y1 = j.at("pns_y1").get<double>();
  r.pns_y0 = j.at("pns_y0").get<double>();
  r.pn_y1 = j.at("pn_y1").get<double>();
  r.ps_y1 = j.at("ps_y1").get<double>();
  r.pn_y0 = j.at("pn_y0").get<double>();
  r.ps_y0 = j.at("ps_y0").get<double>();
  r.bound_y1 = j.at("bound_y1").get<double>();
  r.bound_y0 = j.at("bound_y0").get<double>();
  const auto& f = j.at("flags");
  r.di_degenerate = f.at("di_degenerate").get<bool>();
  r.pn_y1_zero_denominator = f.at("pn_y1_zero_denominator").get<bool>();
  r.ps_y1_zero_denominator = f.at("ps_y1_zero_denominator").get<bool>();
  r.pn_y0_zero_denominator = f.at("pn_y0_zero_denominator").get<bool>();
  r.ps_y0_zero_denominator = f.at("ps_y0_zero_denominator").get<bool>();
  const auto& c = j.at("counts");
  r.n_rows = c.at("rows").get<std::size_t>();
  r.n_present = c.at("present").get<std::size_t>();
  r.n_absent = c.at("absent").get<std::size_t>();
  r.n_dropped = c.at("dropped").get<std::size_t>();
  return r;
}

}  // namespace gift
