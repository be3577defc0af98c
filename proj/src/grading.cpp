#include "halluc/grading.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "halluc/numeric.hpp"
#include "halluc/rng.hpp"

namespace halluc {

namespace {

std::string describe(std::size_t line, const std::string& item_id, const std::string& message) {
  std::ostringstream os;
  if (line > 0) os << "line " << line << ": ";
  if (!item_id.empty()) os << "item '" << item_id << "': ";
  os << message;
  return os.str();
}

}  // namespace

RecordError::RecordError(std::size_t line_no, std::string id, const std::string& message)
    : InvalidInput(describe(line_no, id, message)), line(line_no), item_id(std::move(id)) {}

void validate(const EvalRecord& r, std::size_t line) {
  if (r.abstain && r.correct.has_value()) {
    throw RecordError(line, r.item_id, "abstained record must not carry 'correct'");
  }
  if (!r.abstain && !r.correct.has_value()) {
    throw RecordError(line, r.item_id, "answered record requires 'correct'");
  }
  if (r.confidence && !(*r.confidence >= 0.0 && *r.confidence <= 1.0)) {
    throw RecordError(line, r.item_id, "confidence must lie in [0, 1]");
  }
}

std::vector<EvalRecord> parse_records(std::istream& in) {
  using nlohmann::json;
  std::vector<EvalRecord> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw RecordError(line, "", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw RecordError(line, "", "record must be a JSON object");
    EvalRecord r;
    const auto id = j.find("item_id");
    if (id == j.end() || !id->is_string()) {
      throw RecordError(line, "", "missing string field 'item_id'");
    }
    r.item_id = id->get<std::string>();
    const auto ab = j.find("abstain");
    if (ab == j.end() || !ab->is_boolean()) {
      throw RecordError(line, r.item_id, "missing boolean field 'abstain'");
    }
    r.abstain = ab->get<bool>();
    if (const auto c = j.find("correct"); c != j.end() && !c->is_null()) {
      if (!c->is_boolean()) throw RecordError(line, r.item_id, "'correct' must be a boolean");
      r.correct = c->get<bool>();
    }
    if (const auto c = j.find("confidence"); c != j.end() && !c->is_null()) {
      if (!c->is_number()) throw RecordError(line, r.item_id, "'confidence' must be a number");
      r.confidence = c->get<double>();
    }
    validate(r, line);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<EvalRecord> parse_records_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read records file '" + path + "'");
  return parse_records(in);
}

std::optional<Rational> rational_approximation(double x, std::int64_t max_den, double tolerance) {
  if (!std::isfinite(x)) return std::nullopt;
  // Convergents h/k of the continued fraction of x.
  std::int64_t h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  double v = x;
  for (int iter = 0; iter < 64; ++iter) {
    const double a_floor = std::floor(v);
    if (std::abs(a_floor) > 1e15) return std::nullopt;
    const auto a = static_cast<std::int64_t>(a_floor);
    const std::int64_t h2 = a * h1 + h0;
    const std::int64_t k2 = a * k1 + k0;
    if (k2 > max_den) return std::nullopt;
    h0 = h1;
    h1 = h2;
    k0 = k1;
    k1 = k2;
    if (std::abs(static_cast<double>(h1) / static_cast<double>(k1) - x) <= tolerance) {
      return Rational{h1, k1};
    }
    const double frac = v - a_floor;
    if (frac == 0.0) return std::nullopt;
    v = 1.0 / frac;
  }
  return std::nullopt;
}

GraderConfig GraderConfig::with_target(double t) {
  if (!(t >= 0.0 && t < 1.0)) throw InvalidInput("target must lie in [0, 1)");
  GraderConfig g;
  g.target_ = t;
  // 0.9 / (1 - 0.9) rounds to 9.000000000000002; 9 / (10 - 9) is exact.
  if (const auto q = rational_approximation(t)) {
    g.penalty_ = static_cast<double>(q->num) / static_cast<double>(q->den - q->num);
  } else {
    g.penalty_ = t / (1.0 - t);
  }
  return g;
}

const std::vector<std::string>& GraderConfig::preset_names() {
  static const std::vector<std::string> names{"binary", "0.5", "0.75", "0.9"};
  return names;
}

GraderConfig GraderConfig::preset(const std::string& name) {
  double t = 0.0;
  if (name == "binary" || name == "0") {
    t = 0.0;
  } else if (name == "0.5") {
    t = 0.5;
  } else if (name == "0.75") {
    t = 0.75;
  } else if (name == "0.9") {
    t = 0.9;
  } else {
    throw InvalidInput("unknown grader preset '" + name + "'");
  }
  GraderConfig g = with_target(t);
  g.preset_ = name == "0" ? "binary" : name;
  return g;
}

ScoreReport score(const std::vector<EvalRecord>& records, const GraderConfig& config) {
  ScoreReport rep;
  rep.target = config.target();
  rep.penalty = config.penalty();
  rep.n_items = records.size();
  for (const auto& r : records) {
    validate(r);
    if (r.abstain) {
      ++rep.n_abstained;
    } else if (*r.correct) {
      ++rep.n_correct;
    } else {
      ++rep.n_wrong;
    }
  }
  rep.total_score = static_cast<double>(rep.n_correct) -
                    config.penalty() * static_cast<double>(rep.n_wrong);
  if (rep.n_items > 0) rep.mean_score = rep.total_score / static_cast<double>(rep.n_items);
  const std::size_t answered = rep.n_correct + rep.n_wrong;
  if (answered > 0) {
    rep.accuracy_among_answered =
        static_cast<double>(rep.n_correct) / static_cast<double>(answered);
  }
  return rep;
}

void BeliefProfile::validate() const {
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& row = items[i];
    if (row.empty()) throw InvalidInput("belief item " + std::to_string(i) + " has no candidates");
    CompensatedSum s;
    for (double v : row) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw InvalidInput("belief item " + std::to_string(i) + " has a negative probability");
      }
      s.add(v);
    }
    if (std::abs(s.value() - 1.0) > kRenormTolerance) {
      throw InvalidInput("belief item " + std::to_string(i) + " does not sum to 1");
    }
  }
}

double expected_answer_score(double confidence, const GraderConfig& config) {
  return confidence - (1.0 - confidence) * config.penalty();
}

namespace {

Decision best_guess(const std::vector<double>& row, const GraderConfig& config) {
  Decision d;
  const auto it = std::max_element(row.begin(), row.end());  // first maximum
  d.response = static_cast<std::size_t>(it - row.begin());
  d.confidence = *it;
  d.expected_score = expected_answer_score(d.confidence, config);
  d.answer = true;
  return d;
}

}  // namespace

PolicyResult optimal_policy(const BeliefProfile& beliefs, const GraderConfig& config) {
  beliefs.validate();
  PolicyResult res;
  res.decisions.reserve(beliefs.items.size());
  CompensatedSum total;
  for (const auto& row : beliefs.items) {
    Decision d = best_guess(row, config);
    if (!(d.confidence > config.target())) {
      d.answer = false;
      d.expected_score = 0.0;
      ++res.abstentions;
    }
    total.add(d.expected_score);
    res.decisions.push_back(d);
  }
  res.expected_total = total.value();
  return res;
}

BeliefProfile random_belief_profile(std::uint64_t seed, std::size_t items) {
  Rng rng(seed);
  BeliefProfile b;
  b.items.resize(items);
  for (auto& row : b.items) {
    const auto k = static_cast<std::size_t>(rng.between(2, 10));
    row.resize(k);
    const bool sparse = rng.bernoulli(0.2);
    double total = 0.0;
    for (double& v : row) {
      v = sparse && rng.bernoulli(0.5) ? 0.0 : rng.exponential();
      total += v;
    }
    if (total == 0.0) {
      row[rng.below(k)] = 1.0;
      total = 1.0;
    }
    for (double& v : row) v /= total;
  }
  return b;
}

MisalignedReport verify_observation_misaligned(std::size_t trials, std::uint64_t seed) {
  if (trials < 1) throw InvalidInput("trials must be at least 1");
  const GraderConfig binary = GraderConfig::with_target(0.0);
  MisalignedReport rep;
  rep.trials = trials;
  rep.items = trials;
  rep.rows.resize(trials);
  for_each_index(trials, [&](std::size_t i) {
    const std::uint64_t s = derive_seed(seed, i);
    const BeliefProfile b = random_belief_profile(s);
    const PolicyResult res = optimal_policy(b, binary);
    rep.rows[i] = {s, b.items[0].size(), res.decisions[0].confidence, res.abstentions == 0};
  });
  for (const auto& r : rep.rows) rep.violations += r.answered ? 0 : 1;
  rep.pass = rep.violations == 0;
  return rep;
}

ComparisonReport compare_models(const BeliefProfile& beliefs, double threshold_a,
                                const GraderConfig& config) {
  beliefs.validate();
  ComparisonReport rep;
  CompensatedSum a, b;
  for (const auto& row : beliefs.items) {
    const Decision d = best_guess(row, config);
    b.add(d.expected_score);
    if (d.confidence < threshold_a) {
      ++rep.a_abstentions;
    } else {
      a.add(d.expected_score);
    }
  }
  rep.score_a = a.value();
  rep.score_b = b.value();
  rep.b_beats_a = rep.score_b > rep.score_a;
  return rep;
}

AuditReport behavioral_calibration_audit(const std::map<double, std::vector<EvalRecord>>& runs,
                                         const AuditConfig& config) {
  if (!(config.slack_failure_probability > 0.0 && config.slack_failure_probability < 1.0)) {
    throw InvalidInput("slack failure probability must lie in (0, 1)");
  }
  AuditReport rep;
  std::optional<double> previous_fraction;
  for (const auto& [t, records] : runs) {
    if (!(t >= 0.0 && t < 1.0)) throw InvalidInput("audit target must lie in [0, 1)");
    AuditRow row;
    row.target = t;
    const ScoreReport s = score(records, GraderConfig::with_target(t));
    row.n_records = s.n_items;
    row.n_answered = s.n_correct + s.n_wrong;
    if (row.n_records == 0) {
      row.undefined = true;
      row.vacuous = true;
      row.calibrated_at_t = true;
      rep.rows.push_back(row);
      continue;
    }
    row.answered_fraction =
        static_cast<double>(row.n_answered) / static_cast<double>(row.n_records);
    if (row.n_answered == 0) {
      row.vacuous = true;
      row.calibrated_at_t = true;
    } else {
      row.accuracy_among_answered = s.accuracy_among_answered;
      if (config.finite_sample_slack) {
        row.slack = std::sqrt(std::log(1.0 / config.slack_failure_probability) /
                              (2.0 * static_cast<double>(row.n_answered)));
      }
      row.calibrated_at_t = *row.accuracy_among_answered >= t - row.slack;
    }
    if (previous_fraction && *row.answered_fraction > *previous_fraction) {
      row.monotone_ok = false;
      rep.monotone = false;
    }
    previous_fraction = row.answered_fraction;
    rep.all_calibrated = rep.all_calibrated && row.calibrated_at_t;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace halluc
