#include "scr/trace_analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "scr/io.hpp"
#include "scr/tokenizer.hpp"

namespace scr {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, 5> kCounterNames{"DECOMP_PLAN", "CAUSAL_INFER", "MONITOR",
                                                        "BACKTRACK", "REPR_REFRAME"};

std::uint64_t& counter(OperatorCounts& c, std::size_t i) {
  switch (i) {
    case 0: return c.decomp_plan;
    case 1: return c.causal_infer;
    case 2: return c.monitor;
    case 3: return c.backtrack;
    default: return c.repr_reframe;
  }
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

}  // namespace

Expected<OperatorCounts, ErrorCode> parse_operator_counts(std::string_view text) {
  OperatorCounts out;
  std::array<bool, 5> seen{};
  for (auto line : split_lines(text)) {
    line = trim(line);
    // Annotators sometimes wrap the block in markdown emphasis or code fences.
    while (!line.empty() && (line.front() == '*' || line.front() == '`')) line.remove_prefix(1);
    while (!line.empty() && (line.back() == '*' || line.back() == '`')) line.remove_suffix(1);
    if (!line.starts_with("COUNT_")) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    const auto name = trim(line.substr(6, colon - 6));
    const auto it = std::find(kCounterNames.begin(), kCounterNames.end(), name);
    if (it == kCounterNames.end()) continue;
    const auto value = trim(line.substr(colon + 1));
    std::uint64_t v = 0;
    const auto* first = value.data();
    const auto* last = value.data() + value.size();
    if (value.empty() || !std::all_of(value.begin(), value.end(),
                                      [](char c) { return c >= '0' && c <= '9'; })) {
      return unexpected(ErrorCode::MalformedInteger);
    }
    if (std::from_chars(first, last, v).ec != std::errc{}) {
      return unexpected(ErrorCode::MalformedInteger);
    }
    const auto idx = static_cast<std::size_t>(it - kCounterNames.begin());
    counter(out, idx) = v;
    seen[idx] = true;
  }
  if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
    return unexpected(ErrorCode::MissingCounter);
  }
  return out;
}

std::string serialize(const OperatorCounts& counts) {
  OperatorCounts c = counts;
  std::string out;
  for (std::size_t i = 0; i < kCounterNames.size(); ++i) {
    out += "COUNT_";
    out += kCounterNames[i];
    out += ':';
    out += std::to_string(counter(c, i));
    out += '\n';
  }
  return out;
}

std::string_view to_string(TransitionOutcome outcome) noexcept {
  switch (outcome) {
    case TransitionOutcome::TT: return "TT";
    case TransitionOutcome::TF: return "TF";
    case TransitionOutcome::FF: return "FF";
    case TransitionOutcome::FT: return "FT";
    case TransitionOutcome::NoRevision: return "NoRevision";
  }
  return "?";
}

std::vector<std::string> extract_answer_states(std::string_view text) {
  const auto lines = split_lines(text);
  std::vector<std::string> states;
  std::size_t i = lines.size();
  while (i > 0) {
    const auto line = trim(lines[i - 1]);
    if (line.empty()) {
      --i;
      continue;
    }
    if (!line.starts_with("\\boxed{") || line.back() != '}') break;
    auto boxed = extract_boxed(line);
    if (!boxed || boxed->raw.size() + 8 != line.size()) break;
    states.push_back(boxed->raw);
    --i;
  }
  std::reverse(states.begin(), states.end());
  return states;
}

TransitionOutcome classify_transition(std::span<const std::string> states, const GroundTruth& gt) {
  if (states.empty()) throw Error(ErrorCode::EmptyTrajectory, "no answer states");
  if (states.size() == 1) return TransitionOutcome::NoRevision;
  const bool first = answers_equal(states.front(), gt.value);
  const bool last = answers_equal(states.back(), gt.value);
  if (first) return last ? TransitionOutcome::TT : TransitionOutcome::TF;
  return last ? TransitionOutcome::FT : TransitionOutcome::FF;
}

std::size_t TransitionSummary::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

double TransitionSummary::preserved_percent() const noexcept {
  const std::size_t r = revised();
  if (r == 0) return 0.0;
  const auto kept = count(TransitionOutcome::TT) + count(TransitionOutcome::FF);
  return 100.0 * static_cast<double>(kept) / static_cast<double>(r);
}

double f1_from_pr(double precision, double recall) noexcept {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

VerificationMetrics metrics_from_confusion(const Confusion& c) {
  const std::size_t n = c.total();
  if (n == 0) throw Error(ErrorCode::EmptyInput, "empty confusion matrix");
  auto pct = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
  };
  VerificationMetrics m;
  m.accuracy = pct(c.tp + c.tn, n);
  m.precision = pct(c.tp, c.tp + c.fp);
  m.recall = pct(c.tp, c.tp + c.fn);
  m.f1 = f1_from_pr(m.precision, m.recall);
  m.confusion = c;
  return m;
}

VerificationMetrics verification_metrics(std::span<const Verdict> verdicts,
                                         std::span<const bool> truths) {
  if (verdicts.size() != truths.size()) {
    throw Error(ErrorCode::LengthMismatch, "verdicts and truths differ in length");
  }
  if (verdicts.empty()) throw Error(ErrorCode::EmptyInput, "no verdicts");
  Confusion c;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    const bool said_t = verdicts[i] == Verdict::T;
    if (said_t) (truths[i] ? c.tp : c.fp)++;
    else (truths[i] ? c.fn : c.tn)++;
  }
  return metrics_from_confusion(c);
}

VerificationMetrics macro_average(std::span<const VerificationMetrics> per_dataset) {
  if (per_dataset.empty()) throw Error(ErrorCode::EmptyInput, "no datasets to average");
  if (per_dataset.size() == 1) return per_dataset.front();
  VerificationMetrics m;
  for (const auto& d : per_dataset) {
    m.accuracy += d.accuracy;
    m.precision += d.precision;
    m.recall += d.recall;
    m.f1 += d.f1;
  }
  const auto n = static_cast<double>(per_dataset.size());
  m.accuracy /= n;
  m.precision /= n;
  m.recall /= n;
  m.f1 /= n;
  return m;
}

LengthStats length_stats(std::span<const std::size_t> counts) {
  if (counts.empty()) throw Error(ErrorCode::EmptyInput, "no lengths");
  std::vector<double> v(counts.begin(), counts.end());
  std::sort(v.begin(), v.end());
  auto quantile = [&](double q) {
    const double rank = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (rank - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  LengthStats s;
  s.n = v.size();
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  s.median = quantile(0.5);
  s.p95 = quantile(0.95);
  return s;
}

LengthStats length_stats(std::span<const std::string> texts) {
  FallbackTokenizer tok;
  std::vector<std::size_t> counts;
  counts.reserve(texts.size());
  for (const auto& t : texts) counts.push_back(tok.tokenize(t).ids.size());
  return length_stats(std::span<const std::size_t>(counts));
}

std::optional<AnalysisKind> parse_analysis_kind(std::string_view s) noexcept {
  if (s == "operators") return AnalysisKind::Operators;
  if (s == "transitions") return AnalysisKind::Transitions;
  if (s == "verification") return AnalysisKind::Verification;
  if (s == "lengths") return AnalysisKind::Lengths;
  return std::nullopt;
}

namespace {

ordered_json metrics_json(const VerificationMetrics& m) {
  ordered_json j{{"accuracy", m.accuracy},
                 {"precision", m.precision},
                 {"recall", m.recall},
                 {"f1", m.f1}};
  if (m.confusion) {
    j["confusion"] = {{"tp", m.confusion->tp},
                      {"fp", m.confusion->fp},
                      {"tn", m.confusion->tn},
                      {"fn", m.confusion->fn}};
  }
  return j;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << v;
  return os.str();
}

std::string text_field(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw Error(ErrorCode::MalformedRecord,
                "line " + std::to_string(line) + ": missing string field '" + key + "'");
  }
  return j[key].get<std::string>();
}

std::string id_field(const json& j, std::size_t line) {
  if (!j.contains("trace_id")) {
    throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": missing trace_id");
  }
  const auto& v = j["trace_id"];
  return v.is_string() ? v.get<std::string>() : v.dump();
}

class Analyzer {
 public:
  virtual ~Analyzer() = default;
  virtual void add(const json& j, std::size_t line) = 0;
  virtual AnalysisReport finish() = 0;
};

class OperatorsAnalyzer final : public Analyzer {
 public:
  OperatorsAnalyzer() {
    csv_ << "trace_id,decomp_plan,causal_infer,monitor,backtrack,repr_reframe,"
            "verification_revision\n";
  }

  void add(const json& j, std::size_t line) override {
    const auto id = id_field(j, line);
    auto counts = parse_operator_counts(text_field(j, "annotator_output", line));
    if (!counts) {
      r_.skipped.push_back(std::to_string(line) + ": " + std::string(to_string(counts.error())));
      return;
    }
    ++r_.records;
    for (std::size_t i = 0; i < 5; ++i) counter(sum_, i) += counter(*counts, i);
    csv_ << id << ',' << counts->decomp_plan << ',' << counts->causal_infer << ','
         << counts->monitor << ',' << counts->backtrack << ',' << counts->repr_reframe << ','
         << counts->verification_revision() << '\n';
  }

  AnalysisReport finish() override {
    const std::size_t n = r_.records;
    ordered_json totals, means;
    auto put = [&](const char* name, std::uint64_t v) {
      totals[name] = v;
      means[name] = n ? static_cast<double>(v) / static_cast<double>(n) : 0.0;
    };
    put("decomp_plan", sum_.decomp_plan);
    put("causal_infer", sum_.causal_infer);
    put("monitor", sum_.monitor);
    put("backtrack", sum_.backtrack);
    put("repr_reframe", sum_.repr_reframe);
    put("verification_revision", sum_.verification_revision());
    ordered_json j{{"kind", "operators"},
                   {"traces", n},
                   {"skipped", r_.skipped.size()},
                   {"totals", totals},
                   {"means", means}};
    r_.json = j.dump(2);
    r_.csv = csv_.str();
    return std::move(r_);
  }

 private:
  AnalysisReport r_;
  OperatorCounts sum_;
  std::ostringstream csv_;
};

class TransitionsAnalyzer final : public Analyzer {
 public:
  void add(const json& j, std::size_t line) override {
    id_field(j, line);
    if (!j.contains("gt")) {
      throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": missing gt");
    }
    const GroundTruth gt{j["gt"].is_string() ? j["gt"].get<std::string>() : j["gt"].dump(), ""};
    std::vector<std::string> states;
    if (j.contains("answer_states")) {
      if (!j["answer_states"].is_array()) {
        throw Error(ErrorCode::MalformedRecord,
                    "line " + std::to_string(line) + ": answer_states must be an array");
      }
      for (const auto& s : j["answer_states"]) {
        states.push_back(s.is_string() ? s.get<std::string>() : s.dump());
      }
    } else {
      states = extract_answer_states(text_field(j, "annotator_output", line));
    }
    if (states.empty()) {
      r_.skipped.push_back(std::to_string(line) + ": " +
                           std::string(to_string(ErrorCode::EmptyTrajectory)));
      return;
    }
    summary_.add(classify_transition(states, gt));
    ++r_.records;
  }

  AnalysisReport finish() override {
    const std::size_t revised = summary_.revised();
    ordered_json jc, jp;
    std::ostringstream csv;
    csv << "outcome,count,percent_of_revised\n";
    for (auto o : kAllTransitions) {
      const auto name = std::string(to_string(o));
      jc[name] = summary_.count(o);
      if (o == TransitionOutcome::NoRevision) {
        csv << name << ',' << summary_.count(o) << ",\n";
        continue;
      }
      const double pct =
          revised ? 100.0 * static_cast<double>(summary_.count(o)) / static_cast<double>(revised) : 0.0;
      jp[name] = pct;
      csv << name << ',' << summary_.count(o) << ',' << fmt(pct) << '\n';
    }
    ordered_json j{{"kind", "transitions"},
                   {"traces", r_.records},
                   {"skipped", r_.skipped.size()},
                   {"counts", jc},
                   {"percent_of_revised", jp},
                   {"correctness_preserved_percent", summary_.preserved_percent()}};
    r_.json = j.dump(2);
    r_.csv = csv.str();
    return std::move(r_);
  }

 private:
  AnalysisReport r_;
  TransitionSummary summary_;
};

class VerificationAnalyzer final : public Analyzer {
 public:
  void add(const json& j, std::size_t line) override {
    id_field(j, line);
    const auto v = text_field(j, "verdict", line);
    if (v != "T" && v != "F") {
      throw Error(ErrorCode::MalformedRecord,
                  "line " + std::to_string(line) + ": verdict must be T or F");
    }
    if (!j.contains("truth") || !(j["truth"].is_boolean() || j["truth"].is_number_integer())) {
      throw Error(ErrorCode::MalformedRecord,
                  "line " + std::to_string(line) + ": truth must be boolean");
    }
    const bool truth =
        j["truth"].is_boolean() ? j["truth"].get<bool>() : j["truth"].get<int>() != 0;
    const std::string ds = j.contains("dataset") && j["dataset"].is_string()
                               ? j["dataset"].get<std::string>()
                               : "all";
    for (Confusion* c : {&by_dataset_[ds], &all_}) {
      if (v == "T") (truth ? c->tp : c->fp)++;
      else (truth ? c->fn : c->tn)++;
    }
    ++r_.records;
  }

  AnalysisReport finish() override {
    if (r_.records == 0) throw Error(ErrorCode::EmptyInput, "no verification records");
    std::vector<VerificationMetrics> per;
    ordered_json jd;
    std::ostringstream csv;
    csv << "dataset,n,accuracy,precision,recall,f1\n";
    for (const auto& [name, c] : by_dataset_) {
      const auto& m = per.emplace_back(metrics_from_confusion(c));
      jd[name] = metrics_json(m);
      csv << name << ',' << c.total() << ',' << fmt(m.accuracy) << ',' << fmt(m.precision) << ','
          << fmt(m.recall) << ',' << fmt(m.f1) << '\n';
    }
    const auto macro = macro_average(per);
    csv << "macro," << all_.total() << ',' << fmt(macro.accuracy) << ',' << fmt(macro.precision)
        << ',' << fmt(macro.recall) << ',' << fmt(macro.f1) << '\n';
    ordered_json j{{"kind", "verification"},
                   {"positive_class", "T"},
                   {"records", r_.records},
                   {"datasets", jd},
                   {"macro_average", metrics_json(macro)},
                   {"pooled", metrics_json(metrics_from_confusion(all_))}};
    r_.json = j.dump(2);
    r_.csv = csv.str();
    return std::move(r_);
  }

 private:
  AnalysisReport r_;
  std::map<std::string, Confusion> by_dataset_;
  Confusion all_;
};

// Keeps one integer per trace; the median needs them all.
class LengthsAnalyzer final : public Analyzer {
 public:
  void add(const json& j, std::size_t line) override {
    id_field(j, line);
    std::size_t n = 0;
    if (j.contains("tokens")) {
      if (!j["tokens"].is_number_unsigned()) {
        throw Error(ErrorCode::MalformedRecord,
                    "line " + std::to_string(line) + ": tokens must be a non-negative integer");
      }
      n = j["tokens"].get<std::size_t>();
    } else {
      n = tok_.tokenize(text_field(j, "text", line)).ids.size();
    }
    const std::string g = j.contains("group") && j["group"].is_string()
                              ? j["group"].get<std::string>()
                              : "all";
    groups_[g].push_back(n);
    ++r_.records;
  }

  AnalysisReport finish() override {
    if (r_.records == 0) throw Error(ErrorCode::EmptyInput, "no length records");
    ordered_json jg;
    std::ostringstream csv;
    csv << "group,n,mean,median,p95\n";
    for (const auto& [name, v] : groups_) {
      const auto s = length_stats(std::span<const std::size_t>(v));
      jg[name] = {{"n", s.n}, {"mean", s.mean}, {"median", s.median}, {"p95", s.p95}};
      csv << name << ',' << s.n << ',' << fmt(s.mean) << ',' << fmt(s.median) << ','
          << fmt(s.p95) << '\n';
    }
    ordered_json j{{"kind", "lengths"}, {"records", r_.records}, {"groups", jg}};
    r_.json = j.dump(2);
    r_.csv = csv.str();
    return std::move(r_);
  }

 private:
  AnalysisReport r_;
  FallbackTokenizer tok_;
  std::map<std::string, std::vector<std::size_t>> groups_;
};

std::unique_ptr<Analyzer> make_analyzer(AnalysisKind kind) {
  switch (kind) {
    case AnalysisKind::Operators: return std::make_unique<OperatorsAnalyzer>();
    case AnalysisKind::Transitions: return std::make_unique<TransitionsAnalyzer>();
    case AnalysisKind::Verification: return std::make_unique<VerificationAnalyzer>();
    case AnalysisKind::Lengths: return std::make_unique<LengthsAnalyzer>();
  }
  throw Error(ErrorCode::InvalidConfig, "unknown analysis kind");
}

}  // namespace

AnalysisReport analyze(std::istream& in, AnalysisKind kind) {
  auto analyzer = make_analyzer(kind);
  for_each_line(in, [&](std::string_view line, std::size_t no) {
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(no) + ": " + e.what());
    }
    if (!j.is_object()) {
      throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(no) + ": not an object");
    }
    analyzer->add(j, no);
  });
  return analyzer->finish();
}

}  // namespace scr
