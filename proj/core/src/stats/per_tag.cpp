#include "ssbc/stats/per_tag.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ssbc/parallel.hpp"
#include "ssbc/stats/special_functions.hpp"

namespace ssbc::stats {

std::string_view to_string(Condition c) { return c == Condition::distress ? "distress" : "community"; }

std::string_view to_string(RegressionMethod m) {
  switch (m) {
    case RegressionMethod::plain:
      return "plain";
    case RegressionMethod::cluster_robust:
      return "cluster_robust";
    case RegressionMethod::random_intercept:
      return "random_intercept";
  }
  return "plain";
}

std::string_view to_string(TurnCoding t) { return t == TurnCoding::index ? "index" : "normalized"; }

Condition parse_condition(std::string_view text) {
  if (text == "distress") return Condition::distress;
  if (text == "community") return Condition::community;
  throw PreconditionError("unknown condition: " + std::string(text));
}

RegressionMethod parse_method(std::string_view text) {
  if (text == "plain") return RegressionMethod::plain;
  if (text == "cluster_robust") return RegressionMethod::cluster_robust;
  if (text == "random_intercept") return RegressionMethod::random_intercept;
  throw PreconditionError("unknown regression method: " + std::string(text));
}

TurnCoding parse_turn_coding(std::string_view text) {
  if (text == "index") return TurnCoding::index;
  if (text == "normalized") return TurnCoding::normalized;
  throw PreconditionError("unknown turn coding: " + std::string(text));
}

namespace {

// Canonical row order so results never depend on input order.
std::vector<TidyTurnRecord> canonical(const std::vector<TidyTurnRecord>& records, Condition condition) {
  std::vector<TidyTurnRecord> out;
  for (const auto& r : records) {
    if (condition == Condition::distress && !r.distress_level) continue;
    out.push_back(r);
  }
  std::ranges::sort(out, [](const auto& a, const auto& b) {
    return std::tie(a.conv_id, a.turn_index) < std::tie(b.conv_id, b.turn_index);
  });
  return out;
}

std::string level_of(const TidyTurnRecord& r, Condition condition) {
  return condition == Condition::distress ? std::string(to_string(static_cast<DistressLevel>(*r.distress_level)))
                                          : r.community;
}

std::vector<std::string> levels_of(const std::vector<TidyTurnRecord>& records, Condition condition) {
  if (condition == Condition::distress) {
    std::set<int> present;
    for (const auto& r : records) present.insert(*r.distress_level);
    std::vector<std::string> out;
    for (int l : present) out.emplace_back(to_string(static_cast<DistressLevel>(l)));
    return out;
  }
  std::set<std::string> present;
  for (const auto& r : records) present.insert(r.community);
  return {present.begin(), present.end()};
}

LevelTable table_for(const std::vector<TidyTurnRecord>& rows, SsbcLabel tag, Condition condition) {
  LevelTable t;
  t.levels = levels_of(rows, condition);
  if (t.levels.size() < 2) throw PreconditionError("contingency table needs at least two condition levels");
  t.table = {t.levels.size(), 2, std::vector<double>(t.levels.size() * 2, 0.0)};
  for (const auto& r : rows) {
    const auto level = level_of(r, condition);
    const auto row = static_cast<std::size_t>(std::ranges::find(t.levels, level) - t.levels.begin());
    t.table.counts[row * 2 + (r.has(tag) ? 0 : 1)] += 1.0;
  }
  return t;
}

}  // namespace

LevelTable contingency_table(const std::vector<TidyTurnRecord>& records, SsbcLabel tag, Condition condition) {
  return table_for(canonical(records, condition), tag, condition);
}

std::vector<ContingencyResult> per_tag_contingency(const std::vector<TidyTurnRecord>& records, Condition condition,
                                                   const AnalysisOptions& options) {
  if (records.empty()) throw PreconditionError("no records to analyse");
  const auto rows = canonical(records, condition);
  std::vector<ContingencyResult> out;
  for (auto tag : kAllLabels) {
    ContingencyResult r;
    r.tag = tag;
    try {
      auto t = table_for(rows, tag, condition);
      r.levels = t.levels;
      r.table = t.table;
      r.n = rows.size();
      std::vector<double> rates;
      double present = 0;
      for (std::size_t i = 0; i < t.levels.size(); ++i) {
        const double rate = t.table(i, 0) / (t.table(i, 0) + t.table(i, 1));
        r.per_level_rates[t.levels[i]] = rate;
        rates.push_back(rate);
        present += t.table(i, 0);
      }
      r.delta_pp = delta_pp(rates);
      if (present == 0 || present == static_cast<double>(r.n)) {
        r.degenerate = true;
      } else {
        const auto chi = chi_square(t.table);
        r.chi2 = chi.chi2;
        r.df = chi.df;
        r.p = chi.p;
        r.min_expected = chi.min_expected;
        r.low_expected = chi.low_expected;
        r.cramers_v = cramers_v(chi.chi2, static_cast<double>(r.n), t.table.rows, t.table.cols);
      }
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    out.push_back(std::move(r));
  }
  std::vector<double> family;
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].degenerate || !out[i].error.empty()) continue;
    family.push_back(out[i].p);
    members.push_back(i);
  }
  const auto fdr = bh_fdr(family, options.q);
  for (std::size_t k = 0; k < members.size(); ++k) {
    out[members[k]].p_fdr = fdr.adjusted[k];
    out[members[k]].reject = fdr.reject[k];
  }
  return out;
}

namespace {

struct RegressionInputs {
  Design x;
  std::vector<std::string> clusters;
  std::string warning;
};

RegressionInputs build_design(const std::vector<TidyTurnRecord>& rows, Condition condition,
                              const AnalysisOptions& options) {
  std::vector<std::string> names{"(Intercept)", "distress", "turn_position"};
  std::vector<std::string> dummies;
  RegressionInputs in;
  if (condition == Condition::community) {
    auto levels = levels_of(rows, condition);
    if (levels.size() < 2) throw PreconditionError("community regression needs at least two communities");
    auto reference = options.reference_community;
    if (std::ranges::find(levels, reference) == levels.end()) {
      in.warning = "reference community " + reference + " absent; using " + levels.front();
      reference = levels.front();
    }
    for (const auto& l : levels) {
      if (l != reference) dummies.push_back(l);
    }
    for (const auto& d : dummies) names.push_back("community[" + d + "]");
  }
  in.x = Design(rows.size(), names);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    in.x(i, 0) = 1.0;
    in.x(i, 1) = *r.distress_level;
    double pos = static_cast<double>(r.turn_index);
    if (options.turn_coding == TurnCoding::normalized) {
      pos = r.conversation_turns > 1 ? pos / static_cast<double>(r.conversation_turns - 1) : 0.0;
    }
    in.x(i, 2) = pos;
    for (std::size_t d = 0; d < dummies.size(); ++d) in.x(i, 3 + d) = r.community == dummies[d] ? 1.0 : 0.0;
    in.clusters.push_back(r.conv_id);
  }
  return in;
}

void fill_terms(RegressionResult& r, const Design& x, const std::vector<double>& beta, const std::vector<double>& se) {
  r.terms = x.names;
  for (std::size_t j = 0; j < x.cols; ++j) {
    const auto& t = x.names[j];
    r.coefficients[t] = beta[j];
    r.std_errors[t] = se[j];
    // undefined when the information matrix is singular
    r.p_values[t] = se[j] > 0 && std::isfinite(se[j]) ? normal_two_sided_p(beta[j] / se[j]) : std::nan("");
    r.odds_ratios[t] = std::exp(beta[j]);
  }
}

}  // namespace

std::vector<RegressionResult> per_tag_regression(const std::vector<TidyTurnRecord>& records, Condition condition,
                                                 RegressionMethod method, const AnalysisOptions& options) {
  if (records.empty()) throw PreconditionError("no records to analyse");
  // Distress is a covariate in both designs.
  const auto rows = canonical(records, Condition::distress);
  std::vector<RegressionResult> out(kLabelCount);
  parallel_for(kLabelCount, options.concurrency, [&](std::size_t t) {
    auto& r = out[t];
    r.tag = kAllLabels[t];
    r.method = method;
    try {
      const auto in = build_design(rows, condition, options);
      r.warning = in.warning;
      std::vector<int> y;
      for (const auto& row : rows) y.push_back(row.has(r.tag) ? 1 : 0);
      r.n = rows.size();
      r.clusters = index_clusters(in.clusters).count;
      const auto plain = fit_logistic(in.x, y);
      auto note = [&](const std::string& w) {
        if (w.empty()) return;
        r.warning += r.warning.empty() ? w : "; " + w;
      };
      switch (method) {
        case RegressionMethod::plain:
          fill_terms(r, in.x, plain.beta, plain.std_errors);
          r.converged = plain.converged && !plain.separation;
          note(plain.warning);
          break;
        case RegressionMethod::cluster_robust:
          fill_terms(r, in.x, plain.beta, clustered_se(plain, in.x, y, in.clusters).std_errors);
          r.converged = plain.converged && !plain.separation;
          note(plain.warning);
          break;
        case RegressionMethod::random_intercept: {
          const auto ri = fit_random_intercept_logit(in.x, y, in.clusters, options.random_intercept);
          r.converged = ri.converged;
          if (plain.separation) note(plain.warning);
          note(ri.warning);
          if (ri.fallback) {
            r.fallback_used = true;
            fill_terms(r, in.x, ri.fallback->beta, ri.fallback_se->std_errors);
          } else {
            fill_terms(r, in.x, ri.beta, ri.std_errors);
            r.random_intercept_sd = ri.sigma_u;
          }
          break;
        }
      }
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  });

  std::set<std::string> terms;
  for (const auto& r : out) terms.insert(r.terms.begin(), r.terms.end());
  for (const auto& term : terms) {
    std::vector<double> family;
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < out.size(); ++i) {
      auto it = out[i].p_values.find(term);
      if (it == out[i].p_values.end() || !out[i].error.empty() || std::isnan(it->second)) continue;
      family.push_back(it->second);
      members.push_back(i);
    }
    const auto fdr = bh_fdr(family, options.q);
    for (std::size_t k = 0; k < members.size(); ++k) out[members[k]].p_fdr[term] = fdr.adjusted[k];
  }
  return out;
}

json to_json(const ContingencyResult& r) {
  json table = json::array();
  for (std::size_t i = 0; i < r.table.rows; ++i) table.push_back({r.table(i, 0), r.table(i, 1)});
  return {{"tag", to_string(r.tag)},
          {"levels", r.levels},
          {"table", table},
          {"n", r.n},
          {"chi2", r.chi2},
          {"df", r.df},
          {"p", r.p},
          {"p_fdr", r.p_fdr},
          {"reject", r.reject},
          {"cramers_v", r.cramers_v},
          {"delta_pp", r.delta_pp},
          {"per_level_rates", r.per_level_rates},
          {"min_expected", r.min_expected},
          {"low_expected", r.low_expected},
          {"degenerate", r.degenerate},
          {"error", r.error}};
}

json to_json(const RegressionResult& r) {
  return {{"tag", to_string(r.tag)},
          {"method", to_string(r.method)},
          {"terms", r.terms},
          {"coefficients", r.coefficients},
          {"std_errors", r.std_errors},
          {"p_values", r.p_values},
          {"p_fdr", r.p_fdr},
          {"odds_ratios", r.odds_ratios},
          {"random_intercept_sd", r.random_intercept_sd ? json(*r.random_intercept_sd) : json()},
          {"n", r.n},
          {"clusters", r.clusters},
          {"converged", r.converged},
          {"fallback_used", r.fallback_used},
          {"warning", r.warning},
          {"error", r.error}};
}

namespace {

double number(const json& v) { return v.is_null() ? std::nan("") : v.get<double>(); }

std::map<std::string, double> number_map(const json& j) {
  std::map<std::string, double> out;
  for (const auto& [k, v] : j.items()) out[k] = number(v);
  return out;
}

SsbcLabel tag_of(const json& j) {
  auto tag = parse_label(j.at("tag").get<std::string>());
  if (!tag) throw ParseError("unknown tag in stored result: " + j.at("tag").get<std::string>());
  return *tag;
}

}  // namespace

ContingencyResult contingency_from_json(const json& j) {
  ContingencyResult r;
  r.tag = tag_of(j);
  r.levels = j.at("levels").get<std::vector<std::string>>();
  const auto& table = j.at("table");
  r.table.rows = table.size();
  r.table.cols = 2;
  for (const auto& row : table) {
    r.table.counts.push_back(number(row.at(0)));
    r.table.counts.push_back(number(row.at(1)));
  }
  r.n = j.at("n").get<std::size_t>();
  r.chi2 = number(j.at("chi2"));
  r.df = j.at("df").get<int>();
  r.p = number(j.at("p"));
  r.p_fdr = number(j.at("p_fdr"));
  r.reject = j.at("reject").get<bool>();
  r.cramers_v = number(j.at("cramers_v"));
  r.delta_pp = number(j.at("delta_pp"));
  r.per_level_rates = number_map(j.at("per_level_rates"));
  r.min_expected = number(j.at("min_expected"));
  r.low_expected = j.at("low_expected").get<bool>();
  r.degenerate = j.at("degenerate").get<bool>();
  r.error = j.at("error").get<std::string>();
  return r;
}

RegressionResult regression_from_json(const json& j) {
  RegressionResult r;
  r.tag = tag_of(j);
  r.method = parse_method(j.at("method").get<std::string>());
  r.terms = j.at("terms").get<std::vector<std::string>>();
  r.coefficients = number_map(j.at("coefficients"));
  r.std_errors = number_map(j.at("std_errors"));
  r.p_values = number_map(j.at("p_values"));
  r.p_fdr = number_map(j.at("p_fdr"));
  r.odds_ratios = number_map(j.at("odds_ratios"));
  if (!j.at("random_intercept_sd").is_null()) r.random_intercept_sd = j.at("random_intercept_sd").get<double>();
  r.n = j.at("n").get<std::size_t>();
  r.clusters = j.at("clusters").get<std::size_t>();
  r.converged = j.at("converged").get<bool>();
  r.fallback_used = j.at("fallback_used").get<bool>();
  r.warning = j.at("warning").get<std::string>();
  r.error = j.at("error").get<std::string>();
  return r;
}

}  // namespace ssbc::stats
