#include "ssbc/distress_probe.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <random>
#include <regex>
#include <set>

#include <Eigen/Dense>

#include "ssbc/hashing.hpp"
#include "ssbc/llm_gateway.hpp"
#include "ssbc/parallel.hpp"
#include "ssbc/prompts.hpp"

namespace ssbc {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
constexpr int kClasses = 3;
}  // namespace

std::string render_prefix(std::span<const ChatMessage> prefix) {
  std::string out;
  for (const auto& m : prefix) {
    if (m.role == Role::system) continue;
    if (!out.empty()) out += "\n\n";
    out += m.role == Role::user ? "User: " : "Assistant: ";
    out += m.content;
  }
  return out;
}

std::string build_distress_prompt(std::span<const ChatMessage> prefix) {
  if (prefix.empty()) throw PreconditionError("distress prompt needs a non-empty prefix");
  return prompts::render(prompts::distress_classification(), {{"codebook", std::string(prompts::distress_rubric())},
                                                              {"post_title", ""},
                                                              {"post_text", render_prefix(prefix)}});
}

std::string_view to_string(Confidence c) { return c == Confidence::high ? "high" : "low"; }

namespace {

std::string lowered(std::string_view s) {
  std::string out(s);
  std::ranges::transform(out, out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::optional<std::string> last_capture(const std::string& text, const std::regex& re) {
  std::optional<std::string> found;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
    found = (*it)[1].str();
  }
  return found;
}

}  // namespace

DistressJudgment parse_distress_response(std::string_view text) {
  static const std::regex severity_re(R"re("severity"\s*:\s*"([^"]*)")re", std::regex::icase);
  static const std::regex confidence_re(R"re("confidence"\s*:\s*"([^"]*)")re", std::regex::icase);

  // Restrict to the last "Final answer:" line when there is one.
  std::string scope(text);
  const auto lower = lowered(text);
  if (auto pos = lower.rfind("final answer"); pos != std::string::npos) {
    const auto line_end = scope.find('\n', pos);
    const auto candidate = scope.substr(pos, line_end == std::string::npos ? std::string::npos : line_end - pos);
    if (std::regex_search(candidate, severity_re)) scope = candidate;
  }
  const auto severity = last_capture(scope, severity_re);
  if (!severity) throw ParseError("no severity in teacher response");
  auto level = parse_distress_level(*severity);
  if (!level || lowered(*severity) == "moderate_plus") {
    throw ParseError("severity outside {None, Mild, Moderate+}: " + *severity);
  }
  DistressJudgment judgment{*level, std::nullopt};
  if (auto conf = last_capture(scope, confidence_re)) {
    const auto c = lowered(*conf);
    if (c == "high") judgment.confidence = Confidence::high;
    if (c == "low") judgment.confidence = Confidence::low;
  }
  return judgment;
}

std::optional<DistressJudgment> label_prefix(std::span<const ChatMessage> prefix, LlmGateway& gateway,
                                             const DistressTeacherConfig& config) {
  const auto prompt = build_distress_prompt(prefix);
  for (int attempt = 0; attempt < 2; ++attempt) {
    ChatRequest req{config.endpoint, config.model, {{Role::user, prompt}}, config.temperature, config.max_tokens,
                    config.seed + attempt};
    try {
      return parse_distress_response(gateway.chat_complete(req).content);
    } catch (const ParseError&) {
      continue;
    } catch (const GatewayError&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

// ---- data -------------------------------------------------------------------

namespace {

LayerData layer_data_from(std::span<const HiddenStateRecord* const> records, std::uint16_t layer) {
  LayerData data;
  data.layer = layer;
  for (const auto* r : records) {
    if (r->layer != layer || !r->label) continue;
    if (data.y.empty()) {
      data.dim = r->vector.size();
    } else if (r->vector.size() != data.dim) {
      throw PreconditionError("mixed vector dimensions for layer " + std::to_string(layer));
    }
    data.x.insert(data.x.end(), r->vector.begin(), r->vector.end());
    data.y.push_back(ordinal(*r->label));
    data.groups.push_back(r->group_id);
  }
  return data;
}

}  // namespace

LayerData layer_data(std::span<const HiddenStateRecord> records, std::uint16_t layer) {
  std::vector<const HiddenStateRecord*> ptrs;
  for (const auto& r : records) ptrs.push_back(&r);
  return layer_data_from(ptrs, layer);
}

LayerData subset(const LayerData& data, std::span<const std::size_t> rows) {
  LayerData out;
  out.layer = data.layer;
  out.dim = data.dim;
  out.x.reserve(rows.size() * data.dim);
  for (auto i : rows) {
    const auto r = data.row(i);
    out.x.insert(out.x.end(), r.begin(), r.end());
    out.y.push_back(data.y[i]);
    out.groups.push_back(data.groups[i]);
  }
  return out;
}

std::vector<std::uint16_t> layers_of(std::span<const HiddenStateRecord> records) {
  std::set<std::uint16_t> layers;
  for (const auto& r : records) layers.insert(r.layer);
  return {layers.begin(), layers.end()};
}

Standardization fit_standardization(const LayerData& data) {
  const auto n = data.rows();
  if (n == 0) throw PreconditionError("cannot standardize zero rows");
  Eigen::Map<const RowMat> x(data.x.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(data.dim));
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::RowVectorXd var = (x.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(n);
  Standardization s;
  s.mean.assign(mean.data(), mean.data() + mean.size());
  s.scale.resize(data.dim);
  for (std::size_t j = 0; j < data.dim; ++j) {
    const double sd = std::sqrt(var[static_cast<Eigen::Index>(j)]);
    s.scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

namespace {

std::vector<double> standardize(const LayerData& data, const Standardization& s) {
  std::vector<double> z(data.x.size());
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < data.dim; ++j) {
      z[i * data.dim + j] = (data.x[i * data.dim + j] - s.mean[j]) / s.scale[j];
    }
  }
  return z;
}

std::array<double, 3> softmax3(const std::array<double, 3>& s) {
  const double m = std::max({s[0], s[1], s[2]});
  std::array<double, 3> p{};
  double total = 0;
  for (int c = 0; c < kClasses; ++c) total += (p[c] = std::exp(s[c] - m));
  for (auto& v : p) v /= total;
  return p;
}

// Highest probability; near-ties resolve toward the higher severity.
int argmax_high(const std::array<double, 3>& p) {
  int best = 2;
  for (int c = 1; c >= 0; --c) {
    if (p[c] > p[best] + 1e-12) best = c;
  }
  return best;
}

}  // namespace

ClassificationMetrics classification_metrics(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw PreconditionError("metric inputs differ in length");
  if (truth.empty()) throw PreconditionError("metrics need at least one prediction");
  ClassificationMetrics m;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= kClasses || predicted[i] < 0 || predicted[i] >= kClasses) {
      throw PreconditionError("class index out of range");
    }
    ++m.confusion[truth[i]][predicted[i]];
    correct += truth[i] == predicted[i] ? 1 : 0;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  double sum = 0;
  int present = 0;
  for (int c = 0; c < kClasses; ++c) {
    std::size_t tp = m.confusion[c][c], row = 0, col = 0;
    for (int o = 0; o < kClasses; ++o) {
      row += m.confusion[c][o];
      col += m.confusion[o][c];
    }
    if (row == 0 && col == 0) continue;
    m.per_class_f1[c] = 2.0 * static_cast<double>(tp) / static_cast<double>(row + col);
    sum += m.per_class_f1[c];
    ++present;
  }
  m.macro_f1 = sum / present;
  return m;
}

double softmax_objective(std::span<const double> z, std::size_t d, std::span<const int> y, double l2,
                         std::span<const double> params, std::vector<double>* grad) {
  const auto n = static_cast<Eigen::Index>(y.size());
  const auto di = static_cast<Eigen::Index>(d);
  if (z.size() != y.size() * d || params.size() != 3 * d + 3) throw PreconditionError("objective size mismatch");
  Eigen::Map<const RowMat> Z(z.data(), n, di);
  Eigen::Map<const RowMat> W(params.data(), kClasses, di);
  Eigen::Map<const Eigen::RowVector3d> b(params.data() + 3 * d);

  RowMat S = Z * W.transpose();
  S.rowwise() += b;
  double loss = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = S.row(i).maxCoeff();
    const double lse = m + std::log((S.row(i).array() - m).exp().sum());
    loss += lse - S(i, y[i]);
    S.row(i) = (S.row(i).array() - lse).exp();
    S(i, y[i]) -= 1.0;  // S now holds p - onehot(y)
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  loss = (loss + 0.5 * l2 * W.squaredNorm()) * inv_n;
  if (grad) {
    grad->resize(params.size());
    Eigen::Map<RowMat> gW(grad->data(), kClasses, di);
    Eigen::Map<Eigen::RowVector3d> gb(grad->data() + 3 * d);
    gW = (S.transpose() * Z + l2 * W) * inv_n;
    gb = S.colwise().sum() * inv_n;
  }
  return loss;
}

namespace {

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// L-BFGS with Armijo backtracking, so accepted iterates never increase the loss.
Eigen::VectorXd minimize_lbfgs(const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& f,
                               Eigen::VectorXd x, const ProbeHyperparams& hyper, TrainingTrace& trace) {
  Eigen::VectorXd g(x.size());
  double fx = f(x, g);
  trace.loss.push_back(fx);
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> memory;
  Eigen::VectorXd g_new(x.size());
  for (int it = 0; it < hyper.max_iterations; ++it) {
    if (max_abs(g) < hyper.gradient_tolerance) break;

    // two-loop recursion
    Eigen::VectorXd q = g;
    std::vector<double> alpha(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
      const auto& [s, y] = memory[k];
      alpha[k] = s.dot(q) / y.dot(s);
      q -= alpha[k] * y;
    }
    if (!memory.empty()) {
      const auto& [s, y] = memory.back();
      q *= s.dot(y) / y.dot(y);
    }
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const auto& [s, y] = memory[k];
      const double beta = y.dot(q) / y.dot(s);
      q += (alpha[k] - beta) * s;
    }
    Eigen::VectorXd dir = -q;
    double slope = g.dot(dir);
    if (!(slope < 0)) {
      memory.clear();
      dir = -g;
      slope = -g.squaredNorm();
    }
    double step = memory.empty() ? std::min(1.0, 1.0 / std::max(g.norm(), 1e-12)) : 1.0;
    double f_new = 0;
    bool accepted = false;
    while (step > 1e-20) {
      f_new = f(x + step * dir, g_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    Eigen::VectorXd s = step * dir;
    Eigen::VectorXd y = g_new - g;
    x += s;
    g = g_new;
    fx = f_new;
    trace.loss.push_back(fx);
    ++trace.iterations;
    if (s.dot(y) > 1e-12 * y.squaredNorm()) {
      memory.emplace_back(std::move(s), std::move(y));
      if (memory.size() > hyper.lbfgs_memory) memory.pop_front();
    }
  }
  trace.gradient_max_norm = max_abs(g);
  trace.converged = trace.gradient_max_norm < hyper.gradient_tolerance;
  return x;
}

}  // namespace

std::array<double, 3> ProbeModel::predict_proba(std::span<const double> v) const {
  if (v.size() != dim) throw PreconditionError("vector dimension differs from probe dimension");
  std::array<double, 3> s = bias;
  for (int c = 0; c < kClasses; ++c) {
    const double* w = weights.data() + c * dim;
    double acc = 0;
    for (std::size_t j = 0; j < dim; ++j) acc += w[j] * (v[j] - standardization.mean[j]) / standardization.scale[j];
    s[c] += acc;
  }
  return softmax3(s);
}

std::array<double, 3> ProbeModel::predict_proba(std::span<const float> v) const {
  std::vector<double> d(v.begin(), v.end());
  return predict_proba(std::span<const double>(d));
}

ProbeModel train_probe(const LayerData& data, const ProbeHyperparams& hyper, TrainingTrace* trace) {
  if (data.rows() < 10) throw PreconditionError("probe training needs at least 10 examples");
  if (std::set<int>(data.y.begin(), data.y.end()).size() < 2) {
    throw PreconditionError("probe training needs at least two classes");
  }
  if (!std::ranges::all_of(data.x, [](double v) { return std::isfinite(v); })) {
    throw PreconditionError("non-finite feature in probe training data");
  }
  if (hyper.l2 < 0) throw PreconditionError("l2 penalty must be non-negative");

  ProbeModel model;
  model.layer = data.layer;
  model.dim = data.dim;
  model.standardization = fit_standardization(data);
  const auto z = standardize(data, model.standardization);
  const auto d = data.dim;

  std::vector<double> grad;
  auto objective = [&](const Eigen::VectorXd& p, Eigen::VectorXd& g) {
    const double f = softmax_objective(z, d, data.y, hyper.l2, {p.data(), static_cast<std::size_t>(p.size())}, &grad);
    g = Eigen::Map<const Eigen::VectorXd>(grad.data(), static_cast<Eigen::Index>(grad.size()));
    return f;
  };
  TrainingTrace local;
  auto& t = trace ? *trace : local;
  t = {};
  const auto params = minimize_lbfgs(objective, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(3 * d + 3)), hyper, t);
  model.weights.assign(params.data(), params.data() + 3 * d);
  for (int c = 0; c < kClasses; ++c) model.bias[c] = params[static_cast<Eigen::Index>(3 * d + c)];
  return model;
}

std::vector<int> grouped_folds(std::span<const std::string> groups, int k, std::uint64_t seed) {
  if (k < 2) throw PreconditionError("cross-validation needs k >= 2");
  const std::set<std::string> distinct(groups.begin(), groups.end());
  std::vector<std::string> unique(distinct.begin(), distinct.end());
  if (unique.size() < static_cast<std::size_t>(k)) {
    throw PreconditionError("fewer groups (" + std::to_string(unique.size()) + ") than folds (" +
                            std::to_string(k) + ")");
  }
  // Fisher-Yates on raw engine output keeps the order identical across standard libraries.
  std::mt19937_64 rng(seed);
  for (std::size_t i = unique.size(); i > 1; --i) std::swap(unique[i - 1], unique[rng() % i]);
  std::map<std::string, int> fold_of_group;
  for (std::size_t i = 0; i < unique.size(); ++i) fold_of_group[unique[i]] = static_cast<int>(i % k);
  std::vector<int> folds;
  folds.reserve(groups.size());
  for (const auto& g : groups) folds.push_back(fold_of_group.at(g));
  return folds;
}

CvResult cross_validate(const LayerData& data, int k, std::uint64_t seed, const ProbeHyperparams& hyper) {
  CvResult result;
  result.fold_of_row = grouped_folds(data.groups, k, seed);
  std::vector<int> predicted(data.rows(), 0);
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < data.rows(); ++i) (result.fold_of_row[i] == f ? test : train).push_back(i);
    const auto model = train_probe(subset(data, train), hyper);
    result.fold_standardization.push_back(model.standardization);
    for (auto i : test) predicted[i] = argmax_high(model.predict_proba(data.row(i)));
  }
  result.metrics = classification_metrics(data.y, predicted);
  return result;
}

std::vector<LayerEvaluation> evaluate_layers(std::span<const HiddenStateRecord> records,
                                             const ProbeTrainingConfig& config) {
  std::vector<const HiddenStateRecord*> ptrs;
  for (const auto& r : records) ptrs.push_back(&r);
  std::vector<std::uint16_t> layers;
  for (auto l : layers_of(records)) {
    if (config.min_layer && l < *config.min_layer) continue;
    if (config.max_layer && l > *config.max_layer) continue;
    layers.push_back(l);
  }
  std::vector<LayerEvaluation> out(layers.size());
  parallel_for(layers.size(), config.concurrency, [&](std::size_t i) {
    const auto data = layer_data_from(ptrs, layers[i]);
    out[i] = {layers[i], cross_validate(data, config.folds, config.seed, config.hyper).metrics};
  });
  return out;
}

std::vector<std::uint16_t> select_layers(const std::map<std::uint16_t, double>& macro_f1, std::size_t k) {
  if (k == 0) throw PreconditionError("ensemble size must be positive");
  if (k > macro_f1.size()) {
    throw PreconditionError("cannot select " + std::to_string(k) + " layers from " +
                            std::to_string(macro_f1.size()));
  }
  std::vector<std::pair<std::uint16_t, double>> ranked(macro_f1.begin(), macro_f1.end());
  // map iteration is ascending by layer, so a stable sort keeps lower layers first on ties
  std::ranges::stable_sort(ranked, [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::uint16_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(ranked[i].first);
  return out;
}

EnsembleProbe build_ensemble(std::span<const HiddenStateRecord> records,
                             const std::vector<LayerEvaluation>& evaluations, std::size_t k,
                             const ProbeHyperparams& hyper) {
  std::map<std::uint16_t, double> f1;
  std::map<std::uint16_t, ClassificationMetrics> metrics;
  for (const auto& e : evaluations) {
    f1[e.layer] = e.metrics.macro_f1;
    metrics[e.layer] = e.metrics;
  }
  EnsembleProbe ensemble;
  for (auto layer : select_layers(f1, k)) {
    auto model = train_probe(layer_data(records, layer), hyper);
    model.cv_metrics = metrics.at(layer);
    ensemble.members.push_back(std::move(model));
  }
  return ensemble;
}

DistressEstimate combine_probabilities(std::span<const std::array<double, 3>> member_probs) {
  if (member_probs.empty()) throw PreconditionError("ensemble has no members");
  std::array<double, 3> avg{};
  for (const auto& p : member_probs) {
    for (int c = 0; c < kClasses; ++c) avg[c] += p[c];
  }
  const double total = avg[0] + avg[1] + avg[2];
  for (auto& v : avg) v /= total;
  return {static_cast<DistressLevel>(argmax_high(avg)), avg};
}

DistressEstimate ensemble_predict(const EnsembleProbe& ensemble,
                                  const std::map<std::uint16_t, std::vector<float>>& vectors) {
  std::vector<std::array<double, 3>> probs;
  for (const auto& m : ensemble.members) {
    auto it = vectors.find(m.layer);
    if (it == vectors.end()) throw PreconditionError("missing hidden state for layer " + std::to_string(m.layer));
    probs.push_back(m.predict_proba(std::span<const float>(it->second)));
  }
  return combine_probabilities(probs);
}

// ---- serialization ----------------------------------------------------------

namespace {

std::string hex_doubles(std::span<const double> values) {
  std::vector<std::byte> bytes;
  bytes.reserve(values.size() * 8);
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<std::byte>((bits >> (8 * b)) & 0xFF));
  }
  return hex_encode(bytes);
}

std::vector<double> doubles_from_hex(std::string_view hex) {
  const auto bytes = hex_decode(hex);
  if (bytes.size() % 8 != 0) throw ParseError("float64 payload length is not a multiple of 8");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[8 * i + b]) << (8 * b);
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

}  // namespace

json to_json(const ClassificationMetrics& m) {
  return {{"macro_f1", m.macro_f1}, {"per_class_f1", m.per_class_f1}, {"accuracy", m.accuracy},
          {"confusion", m.confusion}};
}

ClassificationMetrics classification_metrics_from_json(const json& j) {
  ClassificationMetrics m;
  m.macro_f1 = j.at("macro_f1").get<double>();
  m.per_class_f1 = j.at("per_class_f1").get<std::array<double, 3>>();
  m.accuracy = j.at("accuracy").get<double>();
  if (j.contains("confusion")) m.confusion = j.at("confusion").get<std::array<std::array<std::size_t, 3>, 3>>();
  return m;
}

json to_json(const ProbeModel& model) {
  return {{"layer", model.layer},
          {"dim", model.dim},
          {"weights", hex_doubles(model.weights)},
          {"bias", hex_doubles(model.bias)},
          {"mean", hex_doubles(model.standardization.mean)},
          {"scale", hex_doubles(model.standardization.scale)},
          {"cv_metrics", to_json(model.cv_metrics)}};
}

ProbeModel probe_model_from_json(const json& j) {
  ProbeModel m;
  m.layer = j.at("layer").get<std::uint16_t>();
  m.dim = j.at("dim").get<std::size_t>();
  m.weights = doubles_from_hex(j.at("weights").get<std::string>());
  const auto bias = doubles_from_hex(j.at("bias").get<std::string>());
  m.standardization.mean = doubles_from_hex(j.at("mean").get<std::string>());
  m.standardization.scale = doubles_from_hex(j.at("scale").get<std::string>());
  if (m.weights.size() != 3 * m.dim || bias.size() != 3 || m.standardization.mean.size() != m.dim ||
      m.standardization.scale.size() != m.dim) {
    throw ParseError("probe payload sizes do not match dim");
  }
  std::ranges::copy(bias, m.bias.begin());
  m.cv_metrics = classification_metrics_from_json(j.at("cv_metrics"));
  return m;
}

json to_json(const EnsembleProbe& ensemble) {
  json members = json::array();
  for (const auto& m : ensemble.members) members.push_back(to_json(m));
  return {{"members", members}};
}

EnsembleProbe ensemble_from_json(const json& j) {
  EnsembleProbe e;
  std::set<std::uint16_t> seen;
  for (const auto& m : j.at("members")) {
    e.members.push_back(probe_model_from_json(m));
    if (!seen.insert(e.members.back().layer).second) throw ParseError("duplicate layer in ensemble");
  }
  return e;
}

// ---- human comparison -------------------------------------------------------

HumanDistressComparison compare_with_human(std::span<const DistressPair> pairs) {
  if (pairs.empty()) throw PreconditionError("no turns with a human distress label to compare");
  HumanDistressComparison c;
  c.items = pairs.size();
  std::size_t exact = 0;
  for (const auto& p : pairs) {
    ++c.confusion[ordinal(p.human)][ordinal(p.estimated)];
    exact += p.human == p.estimated ? 1 : 0;
  }
  const double n = static_cast<double>(pairs.size());
  c.exact_match_rate = static_cast<double>(exact) / n;

  std::array<double, 3> row{}, col{};
  for (int i = 0; i < kClasses; ++i) {
    for (int j = 0; j < kClasses; ++j) {
      row[i] += static_cast<double>(c.confusion[i][j]);
      col[j] += static_cast<double>(c.confusion[i][j]);
    }
  }
  double observed = 0, expected = 0;
  for (int i = 0; i < kClasses; ++i) {
    for (int j = 0; j < kClasses; ++j) {
      const double w = static_cast<double>((i - j) * (i - j)) / 4.0;
      observed += w * static_cast<double>(c.confusion[i][j]) / n;
      expected += w * row[i] * col[j] / (n * n);
    }
    for (int j = 0; j < kClasses; ++j) {
      c.row_shares[i][j] = row[i] > 0 ? static_cast<double>(c.confusion[i][j]) / row[i] : 0.0;
    }
  }
  if (expected > 0) c.quadratic_weighted_kappa = 1.0 - observed / expected;
  return c;
}

json to_json(const HumanDistressComparison& c) {
  return {{"items", c.items},
          {"exact_match_rate", c.exact_match_rate},
          {"quadratic_weighted_kappa", c.quadratic_weighted_kappa ? json(*c.quadratic_weighted_kappa) : json()},
          {"confusion", c.confusion},
          {"row_shares", c.row_shares}};
}

}  // namespace ssbc
