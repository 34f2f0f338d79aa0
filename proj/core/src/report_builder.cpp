#include "ssbc/report_builder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace ssbc {

std::string format_number(double value) {
  if (!std::isfinite(value)) return "";
  return json(value).dump();
}

namespace {

std::string label_list(LabelMask mask) {
  std::string out;
  for (auto l : kAllLabels) {
    if (!(mask & bit(l))) continue;
    if (!out.empty()) out += "; ";
    out += to_string(l);
  }
  return out;
}

std::string md_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

}  // namespace

std::string render_csv(const Table& table) {
  auto line = [](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += stats::csv_field(cells[i]);
    }
    return out + '\n';
  };
  std::string out = line(table.header);
  for (const auto& r : table.rows) out += line(r);
  return out;
}

std::string render_markdown(const Table& table) {
  std::string out;
  if (!table.title.empty()) out += "## " + table.title + "\n\n";
  if (!table.rows.empty()) {
    out += "|";
    for (const auto& h : table.header) out += " " + md_cell(h) + " |";
    out += "\n|";
    for (std::size_t i = 0; i < table.header.size(); ++i) out += " --- |";
    out += "\n";
    for (const auto& r : table.rows) {
      out += "|";
      for (const auto& c : r) out += " " + md_cell(c) + " |";
      out += "\n";
    }
    out += "\n";
  }
  if (!table.note.empty()) out += "_" + table.note + "_\n\n";
  return out;
}

PrevalenceReport prevalence_report(std::span<const LabelSet> consensus) {
  if (consensus.empty()) throw PreconditionError("prevalence needs at least one annotated turn");
  PrevalenceReport report;
  report.n_turns = consensus.size();
  const double n = static_cast<double>(consensus.size());
  for (auto tag : kAllLabels) {
    TagRate r;
    r.tag = tag;
    r.count = static_cast<std::size_t>(std::ranges::count_if(consensus, [&](const LabelSet& s) { return s.contains(tag); }));
    r.rate = static_cast<double>(r.count) / n;
    const double half = 1.96 * std::sqrt(r.rate * (1.0 - r.rate) / n);
    r.ci_low = std::max(0.0, r.rate - half);
    r.ci_high = std::min(1.0, r.rate + half);
    report.rates.push_back(r);
  }
  std::ranges::stable_sort(report.rates, [](const TagRate& a, const TagRate& b) { return a.rate > b.rate; });
  return report;
}

json to_json(const PrevalenceReport& report) {
  json rates = json::array();
  for (const auto& r : report.rates) {
    rates.push_back({{"tag", to_string(r.tag)},
                     {"count", r.count},
                     {"rate", r.rate},
                     {"ci_low", r.ci_low},
                     {"ci_high", r.ci_high}});
  }
  return {{"n_turns", report.n_turns}, {"rates", rates}};
}

PrevalenceReport prevalence_from_json(const json& j) {
  PrevalenceReport report;
  report.n_turns = j.at("n_turns").get<std::size_t>();
  for (const auto& r : j.at("rates")) {
    auto tag = parse_label(r.at("tag").get<std::string>());
    if (!tag) throw ParseError("unknown tag in prevalence record");
    report.rates.push_back({*tag, r.at("count").get<std::size_t>(), r.at("rate").get<double>(),
                            r.at("ci_low").get<double>(), r.at("ci_high").get<double>()});
  }
  return report;
}

Table prevalence_table(const PrevalenceReport& report) {
  Table t{"Support-tag prevalence", {"tag", "category", "count", "rate", "ci_low", "ci_high"}, {}, ""};
  for (const auto& r : report.rates) {
    t.rows.push_back({std::string(to_string(r.tag)), std::string(short_name(category_of(r.tag))),
                      std::to_string(r.count), format_number(r.rate), format_number(r.ci_low),
                      format_number(r.ci_high)});
  }
  t.note = "n_turns = " + std::to_string(report.n_turns) + "; 95% normal-approximation intervals";
  return t;
}

Table distress_report(std::span<const stats::ContingencyResult> results) {
  std::vector<const stats::ContingencyResult*> significant;
  std::vector<std::string> levels;
  for (const auto& r : results) {
    if (!r.reject || r.degenerate || !r.error.empty()) continue;
    significant.push_back(&r);
    for (const auto& l : r.levels) {
      if (std::ranges::find(levels, l) == levels.end()) levels.push_back(l);
    }
  }
  std::ranges::stable_sort(significant, [](const auto* a, const auto* b) { return a->chi2 > b->chi2; });
  Table t{"Estimated distress and support tags", {"tag", "category"}, {}, ""};
  for (const auto& l : levels) t.header.push_back("rate[" + l + "]");
  for (const char* h : {"chi2", "df", "p_fdr", "cramers_v", "delta_pp"}) t.header.emplace_back(h);
  for (const auto* r : significant) {
    std::vector<std::string> row{std::string(to_string(r->tag)), std::string(short_name(category_of(r->tag)))};
    for (const auto& l : levels) {
      auto it = r->per_level_rates.find(l);
      row.push_back(it == r->per_level_rates.end() ? "" : format_number(it->second));
    }
    row.push_back(format_number(r->chi2));
    row.push_back(std::to_string(r->df));
    row.push_back(format_number(r->p_fdr));
    row.push_back(format_number(r->cramers_v));
    row.push_back(format_number(r->delta_pp));
    t.rows.push_back(std::move(row));
  }
  if (t.rows.empty()) t.note = "No tag is significant after FDR correction.";
  return t;
}

CommunityTables community_report(std::span<const stats::ContingencyResult> contingency,
                                 std::span<const stats::RegressionResult> regressions) {
  std::set<std::string> communities;
  for (const auto& r : contingency) communities.insert(r.levels.begin(), r.levels.end());
  if (communities.size() < 2) throw PreconditionError("community report needs at least two communities");

  CommunityTables out;
  out.spread = {"Community differences in tag prevalence",
                {"tag", "category", "highest", "highest_rate", "lowest", "lowest_rate", "delta_pp", "chi2", "p_fdr",
                 "tie"},
                {},
                ""};
  std::vector<const stats::ContingencyResult*> significant;
  for (const auto& r : contingency) {
    if (r.reject && !r.degenerate && r.error.empty()) significant.push_back(&r);
  }
  std::ranges::stable_sort(significant, [](const auto* a, const auto* b) { return a->delta_pp > b->delta_pp; });
  for (const auto* r : significant) {
    const auto [lo, hi] = std::ranges::minmax_element(
        r->per_level_rates, [](const auto& a, const auto& b) { return a.second < b.second; });
    std::vector<std::string> highest, lowest;
    for (const auto& [c, rate] : r->per_level_rates) {
      if (rate == hi->second) highest.push_back(c);
      if (rate == lo->second) lowest.push_back(c);
    }
    auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (const auto& x : v) s += (s.empty() ? "" : "; ") + x;
      return s;
    };
    const bool tie = highest.size() > 1 || lowest.size() > 1;
    out.spread.rows.push_back({std::string(to_string(r->tag)), std::string(short_name(category_of(r->tag))),
                               join(highest), format_number(hi->second), join(lowest), format_number(lo->second),
                               format_number(r->delta_pp), format_number(r->chi2), format_number(r->p_fdr),
                               tie ? "yes" : "no"});
  }
  if (out.spread.rows.empty()) out.spread.note = "No tag differs significantly across communities.";

  out.odds_ratios = {"Adjusted community odds ratios", {"tag", "term", "odds_ratio", "coefficient", "std_error",
                                                        "p", "p_fdr", "method", "converged", "warning"}, {}, ""};
  for (const auto& r : regressions) {
    if (!r.error.empty()) continue;
    for (const auto& term : r.terms) {
      if (!term.starts_with("community[")) continue;
      auto get = [&](const std::map<std::string, double>& m) {
        auto it = m.find(term);
        return it == m.end() ? std::string() : format_number(it->second);
      };
      out.odds_ratios.rows.push_back({std::string(to_string(r.tag)), term, get(r.odds_ratios), get(r.coefficients),
                                      get(r.std_errors), get(r.p_values), get(r.p_fdr),
                                      std::string(to_string(r.method)), r.converged ? "yes" : "no", r.warning});
    }
  }
  out.odds_ratios.note = "Controls: estimated distress (0-2) and turn position. Blank p: information matrix singular.";
  return out;
}

CrossModelReport cross_model_report(const std::string& run_a, const PrevalenceReport& a, const std::string& hash_a,
                                    const std::string& run_b, const PrevalenceReport& b, const std::string& hash_b) {
  if (hash_a != hash_b) {
    throw PreconditionError("runs " + run_a + " and " + run_b +
                            " were annotated with different annotator configurations (hash " + hash_a + " vs " +
                            hash_b + "); rates are not comparable");
  }
  auto rate_of = [](const PrevalenceReport& p, SsbcLabel tag) {
    auto it = std::ranges::find(p.rates, tag, &TagRate::tag);
    if (it == p.rates.end()) throw PreconditionError("prevalence lacks tag " + std::string(to_string(tag)));
    return it->rate;
  };
  CrossModelReport report{run_a, run_b, {}};
  for (auto tag : kAllLabels) {
    CrossModelRow row{tag, rate_of(a, tag), rate_of(b, tag), 0};
    row.delta_pp = (row.rate_b - row.rate_a) * 100.0;
    report.rows.push_back(row);
  }
  return report;
}

json to_json(const CrossModelReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"tag", to_string(r.tag)}, {"rate_a", r.rate_a}, {"rate_b", r.rate_b}, {"delta_pp", r.delta_pp}});
  }
  return {{"run_a", report.run_a}, {"run_b", report.run_b}, {"rows", rows}};
}

Table cross_model_table(const CrossModelReport& report) {
  Table t{"Cross-run tag prevalence", {"tag", "category", "rate[" + report.run_a + "]", "rate[" + report.run_b + "]",
                                       "delta_pp"}, {}, ""};
  for (const auto& r : report.rows) {
    t.rows.push_back({std::string(to_string(r.tag)), std::string(short_name(category_of(r.tag))),
                      format_number(r.rate_a), format_number(r.rate_b), format_number(r.delta_pp)});
  }
  t.note = "delta_pp = " + report.run_b + " - " + report.run_a + ", percentage points";
  return t;
}

VignetteComparison vignette_comparison(const Conversation& conv, const std::optional<SingleTurnResult>& single) {
  if (!single) throw PreconditionError("no single-turn record for " + conv.conv_id);
  if (!single->labels) throw PreconditionError("single-turn reply for " + conv.conv_id + " is not annotated");
  if (conv.turns.empty()) throw PreconditionError("conversation " + conv.conv_id + " has no turns");
  VignetteComparison v;
  v.conv_id = conv.conv_id;
  v.single_turn = *single->labels;
  v.late_start = (conv.turns.size() + 1) / 2;
  LabelMask late = 0, all = 0;
  for (std::size_t i = 0; i < conv.turns.size(); ++i) {
    const auto& labels = conv.turns[i].consensus_labels;
    if (!labels) throw PreconditionError("turn " + std::to_string(i) + " of " + conv.conv_id + " is not annotated");
    v.trajectory.push_back(*labels);
    all |= labels->mask();
    if (i >= v.late_start) late |= labels->mask();
  }
  v.late_only = static_cast<LabelMask>(late & ~v.single_turn.mask());
  v.single_only = static_cast<LabelMask>(v.single_turn.mask() & ~all);
  return v;
}

json to_json(const VignetteComparison& v) {
  json trajectory = json::array();
  for (const auto& s : v.trajectory) trajectory.push_back(to_json(s));
  auto as_list = [](LabelMask m) {
    json out = json::array();
    for (auto l : kAllLabels) {
      if (m & bit(l)) out.push_back(to_string(l));
    }
    return out;
  };
  return {{"conv_id", v.conv_id},
          {"trajectory", trajectory},
          {"single_turn", to_json(v.single_turn)},
          {"late_start", v.late_start},
          {"late_only", as_list(v.late_only)},
          {"single_only", as_list(v.single_only)}};
}

Table vignette_table(const VignetteComparison& v) {
  Table t{"Multi-turn trajectory vs single-turn reply: " + v.conv_id, {"turn", "labels"}, {}, ""};
  for (std::size_t i = 0; i < v.trajectory.size(); ++i) {
    t.rows.push_back({std::to_string(i), label_list(v.trajectory[i].mask())});
  }
  t.rows.push_back({"single-turn", label_list(v.single_turn.mask())});
  t.note = "late turns start at " + std::to_string(v.late_start) + "; late-only: [" + label_list(v.late_only) +
           "]; single-only: [" + label_list(v.single_only) + "]";
  return t;
}

}  // namespace ssbc
