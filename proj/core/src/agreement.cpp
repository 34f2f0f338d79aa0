#include "ssbc/agreement.hpp"

#include <algorithm>
#include <bit>
#include <memory>

namespace ssbc {

namespace {
void require_same_size(std::size_t a, std::size_t b) {
  if (a != b) throw PreconditionError("agreement inputs differ in length");
}
}  // namespace

double pairwise_f1(std::span<const LabelMask> a, std::span<const LabelMask> b) {
  require_same_size(a.size(), b.size());
  long inter = 0;
  long total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += std::popcount(static_cast<unsigned>(a[i] & b[i]));
    total += std::popcount(static_cast<unsigned>(a[i])) + std::popcount(static_cast<unsigned>(b[i]));
  }
  return total == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

double pairwise_jaccard(std::span<const LabelMask> a, std::span<const LabelMask> b) {
  require_same_size(a.size(), b.size());
  long inter = 0;
  long uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += std::popcount(static_cast<unsigned>(a[i] & b[i]));
    uni += std::popcount(static_cast<unsigned>(a[i] | b[i]));
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double exact_match_rate(std::span<const std::vector<LabelMask>> runs) {
  if (runs.empty() || runs.front().empty()) return 1.0;
  const auto n = runs.front().size();
  for (const auto& r : runs) require_same_size(r.size(), n);
  std::size_t matches = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool all_same = std::ranges::all_of(runs, [&](const auto& r) { return r[i] == runs.front()[i]; });
    matches += all_same ? 1 : 0;
  }
  return static_cast<double>(matches) / static_cast<double>(n);
}

json to_json(const StabilityReport& report, const std::vector<double>& temperatures) {
  json pairs = json::array();
  for (const auto& [ij, f1] : report.pairwise_f1) {
    json p{{"run_a", ij.first}, {"run_b", ij.second}, {"f1", f1}, {"jaccard", report.pairwise_jaccard.at(ij)}};
    if (ij.second < temperatures.size()) {
      p["temperature_a"] = temperatures[ij.first];
      p["temperature_b"] = temperatures[ij.second];
    }
    pairs.push_back(std::move(p));
  }
  return {{"pairs", pairs},
          {"exact_threeway_match_rate", report.exact_threeway_match_rate},
          {"mean_f1", report.mean_f1},
          {"mean_jaccard", report.mean_jaccard},
          {"turns", report.turns}};
}

StabilityReport agreement_metrics(std::span<const AnnotationRun* const> runs) {
  if (runs.size() < 2) throw PreconditionError("agreement needs at least two runs");
  std::vector<std::vector<LabelMask>> masks(runs.size());
  const auto& base = runs.front()->turns;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& turns = runs[r]->turns;
    if (turns.size() != base.size()) throw ConsistencyError("annotation runs cover different turn keys");
    auto it = base.begin();
    for (const auto& [key, ann] : turns) {
      if (key != it->first) throw ConsistencyError("annotation runs cover different turn keys");
      masks[r].push_back(ann.labels.mask());
      ++it;
    }
  }
  StabilityReport report;
  report.turns = base.size();
  double f1_sum = 0;
  double j_sum = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (std::size_t j = i + 1; j < runs.size(); ++j) {
      const double f1 = pairwise_f1(masks[i], masks[j]);
      const double jac = pairwise_jaccard(masks[i], masks[j]);
      report.pairwise_f1[{i, j}] = f1;
      report.pairwise_jaccard[{i, j}] = jac;
      f1_sum += f1;
      j_sum += jac;
    }
  }
  const auto pairs = static_cast<double>(report.pairwise_f1.size());
  report.mean_f1 = f1_sum / pairs;
  report.mean_jaccard = j_sum / pairs;
  report.exact_threeway_match_rate = exact_match_rate(masks);
  return report;
}

std::optional<double> cohen_kappa(std::span<const bool> rater_a, std::span<const bool> rater_b) {
  require_same_size(rater_a.size(), rater_b.size());
  if (rater_a.empty()) throw PreconditionError("kappa needs at least one item");
  const auto n = static_cast<double>(rater_a.size());
  double agree = 0;
  double a_yes = 0;
  double b_yes = 0;
  for (std::size_t i = 0; i < rater_a.size(); ++i) {
    agree += rater_a[i] == rater_b[i] ? 1 : 0;
    a_yes += rater_a[i] ? 1 : 0;
    b_yes += rater_b[i] ? 1 : 0;
  }
  const double p_o = agree / n;
  const double pa = a_yes / n;
  const double pb = b_yes / n;
  const double p_e = pa * pb + (1 - pa) * (1 - pb);
  if (p_e >= 1.0) return std::nullopt;
  return (p_o - p_e) / (1 - p_e);
}

double masi_similarity(LabelMask a, LabelMask b) {
  if (a == b) return 1.0;
  const auto inter = std::popcount(static_cast<unsigned>(a & b));
  if (inter == 0) return 0.0;
  const double jaccard = static_cast<double>(inter) / std::popcount(static_cast<unsigned>(a | b));
  const bool subset = (a & b) == a || (a & b) == b;
  return jaccard * (subset ? 2.0 / 3.0 : 1.0 / 3.0);
}

double masi_distance(LabelMask a, LabelMask b) { return 1.0 - masi_similarity(a, b); }

json to_json(const HumanAgreementReport& report) {
  json rows = json::array();
  for (const auto& r : report.per_label) {
    json row{{"label", to_string(r.label)},
             {"category", short_name(category_of(r.label))},
             {"model_positives", r.model_positives},
             {"human_positives", r.human_positives},
             {"excluded", r.excluded}};
    row["kappa"] = r.kappa ? json(*r.kappa) : json(nullptr);
    rows.push_back(std::move(row));
  }
  json j{{"items", report.items},
         {"per_label", rows},
         {"micro_f1", report.micro_f1},
         {"macro_f1", report.macro_f1},
         {"mean_masi", report.mean_masi}};
  j["mean_kappa"] = report.mean_kappa ? json(*report.mean_kappa) : json(nullptr);
  return j;
}

HumanAgreementReport compare_with_rater(const std::map<TurnKey, LabelSet>& model,
                                        const std::map<TurnKey, LabelSet>& human, int min_positives) {
  std::vector<LabelMask> m;
  std::vector<LabelMask> h;
  for (const auto& [key, labels] : human) {
    if (auto it = model.find(key); it != model.end()) {
      m.push_back(it->second.mask());
      h.push_back(labels.mask());
    }
  }
  if (m.empty()) throw PreconditionError("no overlapping turns between model and human labels");
  HumanAgreementReport report;
  report.items = m.size();
  report.micro_f1 = pairwise_f1(m, h);

  double masi_sum = 0;
  for (std::size_t i = 0; i < m.size(); ++i) masi_sum += masi_similarity(m[i], h[i]);
  report.mean_masi = masi_sum / static_cast<double>(m.size());

  double macro_sum = 0;
  int macro_n = 0;
  double kappa_sum = 0;
  int kappa_n = 0;
  for (auto label : kAllLabels) {
    LabelAgreement row;
    row.label = label;
    auto a = std::make_unique<bool[]>(m.size());
    auto b = std::make_unique<bool[]>(m.size());
    int tp = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      a[i] = (m[i] & bit(label)) != 0;
      b[i] = (h[i] & bit(label)) != 0;
      row.model_positives += a[i];
      row.human_positives += b[i];
      tp += a[i] && b[i];
    }
    if (row.model_positives + row.human_positives > 0) {
      macro_sum += 2.0 * tp / (row.model_positives + row.human_positives);
      ++macro_n;
    }
    row.excluded = row.model_positives < min_positives || row.human_positives < min_positives;
    if (!row.excluded) {
      row.kappa = cohen_kappa({a.get(), m.size()}, {b.get(), m.size()});
      if (row.kappa) {
        kappa_sum += *row.kappa;
        ++kappa_n;
      }
    }
    report.per_label.push_back(row);
  }
  report.macro_f1 = macro_n ? macro_sum / macro_n : 1.0;
  if (kappa_n) report.mean_kappa = kappa_sum / kappa_n;
  return report;
}

std::map<TurnKey, LabelSet> human_labels_from_records(const std::vector<json>& records) {
  std::map<TurnKey, LabelSet> out;
  for (const auto& r : records) {
    out[{r.at("conv_id").get<std::string>(), r.at("turn").get<std::size_t>()}] = label_set_from_json(r.at("labels"));
  }
  return out;
}

}  // namespace ssbc
