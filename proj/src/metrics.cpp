#include "fedsysid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "fedsysid/error.hpp"

namespace fedsysid {

double bfr(std::span<const double> actual, std::span<const double> predicted) {
  require(actual.size() == predicted.size(), "bfr: length mismatch");
  require(!actual.empty(), "bfr: empty sequence");
  const double mean =
      std::accumulate(actual.begin(), actual.end(), 0.0) /
      static_cast<double>(actual.size());
  double err = 0.0;
  double spread = 0.0;
  for (std::size_t k = 0; k < actual.size(); ++k) {
    const double e = actual[k] - predicted[k];
    const double s = actual[k] - mean;
    err += e * e;
    spread += s * s;
  }
  if (!(spread > 0.0)) {
    throw_error(ErrorCode::kUndefinedBfr,
                "BFR is undefined for a constant output channel");
  }
  if (!std::isfinite(err)) return -std::numeric_limits<double>::infinity();
  return 100.0 * (1.0 - std::sqrt(err / spread));
}

std::vector<double> worker_bfr(const StateSpaceModel& model,
                               const TimeSeriesDataset& data) {
  check_compatible(model, data);
  std::vector<double> out(static_cast<std::size_t>(model.ny()));
  Matrix predicted;
  try {
    predicted = simulate_outputs(model, data.inputs);
  } catch (const SimulationOverflow&) {
    std::fill(out.begin(), out.end(), -std::numeric_limits<double>::infinity());
    return out;
  }
  const auto steps = static_cast<std::size_t>(data.length());
  std::vector<double> y(steps), y_hat(steps);
  for (int p = 0; p < model.ny(); ++p) {
    for (std::size_t k = 0; k < steps; ++k) {
      y[k] = data.outputs(p, static_cast<Eigen::Index>(k));
      y_hat[k] = predicted(p, static_cast<Eigen::Index>(k));
    }
    out[static_cast<std::size_t>(p)] = bfr(y, y_hat);
  }
  return out;
}

std::string WorkerFlags::to_string() const {
  std::string s;
  auto add = [&s](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += '|';
    s += name;
  };
  add(alignment_failed, "alignment_failed");
  add(overflow, "overflow");
  add(stalled, "stalled");
  add(ill_conditioned, "ill_conditioned");
  return s.empty() ? "ok" : s;
}

WorkerFlags WorkerFlags::parse(const std::string& text) {
  WorkerFlags f;
  if (text == "ok") return f;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, '|')) {
    if (item == "alignment_failed") f.alignment_failed = true;
    else if (item == "overflow") f.overflow = true;
    else if (item == "stalled") f.stalled = true;
    else if (item == "ill_conditioned") f.ill_conditioned = true;
    else throw_error(ErrorCode::kParse, "unknown worker flag '" + item + "'");
  }
  return f;
}

const char* to_string(Split split) {
  return split == Split::kTrain ? "train" : "test";
}

namespace {

std::vector<double> worker_mean(const std::vector<std::vector<double>>& bfr) {
  if (bfr.empty()) return {};
  std::vector<double> mean(bfr.front().size(), 0.0);
  for (const auto& w : bfr) {
    for (std::size_t p = 0; p < mean.size(); ++p) mean[p] += w[p];
  }
  for (double& m : mean) m /= static_cast<double>(bfr.size());
  return mean;
}

// Mean and sample standard deviation; values are sorted first so the result
// does not depend on input order.
ChannelStats channel_stats(std::vector<double> values) {
  ChannelStats s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.dispersion = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

bool excluded(const SeedOutcome& o, ExclusionPolicy policy) {
  return policy == ExclusionPolicy::kExcludeUnstableAndFailed &&
         (o.unstable || o.failed);
}

}  // namespace

SeedOutcome seed_outcome(const SeedRecords& records) {
  require(!records.rounds.empty(), "seed has no round records");
  const RoundRecord& last = records.rounds.back();
  SeedOutcome o;
  o.seed = records.seed;
  o.unstable = !last.global_stable;
  o.train_bfr = worker_mean(last.bfr_train);
  o.test_bfr = worker_mean(last.bfr_test);
  for (double v : o.train_bfr) {
    if (!(v >= 0.0)) o.failed = true;
  }
  return o;
}

ExperimentSummary summarize(const std::vector<SeedRecords>& runs,
                            ExclusionPolicy policy) {
  require(!runs.empty(), "summarize: no seeds");
  ExperimentSummary s;
  s.seeds = runs.size();
  for (const auto& r : runs) s.outcomes.push_back(seed_outcome(r));
  std::sort(s.outcomes.begin(), s.outcomes.end(),
            [](const SeedOutcome& a, const SeedOutcome& b) { return a.seed < b.seed; });

  std::vector<const SeedOutcome*> kept;
  for (const auto& o : s.outcomes) {
    if (o.unstable) ++s.unstable;
    if (o.failed) ++s.failed;
    if (excluded(o, policy)) {
      s.excluded.push_back(o.seed);
    } else {
      kept.push_back(&o);
    }
  }
  s.empty = kept.empty();
  if (!kept.empty()) {
    const std::size_t ny = kept.front()->train_bfr.size();
    for (std::size_t p = 0; p < ny; ++p) {
      std::vector<double> train, test;
      for (const SeedOutcome* o : kept) {
        train.push_back(o->train_bfr[p]);
        if (o->test_bfr.size() == ny) test.push_back(o->test_bfr[p]);
      }
      s.train.push_back(channel_stats(std::move(train)));
      if (!test.empty()) s.test.push_back(channel_stats(std::move(test)));
    }
  }

  std::map<int, std::vector<double>> log_kappa;
  for (const auto& run : runs) {
    for (const auto& rec : run.rounds) {
      for (const auto& k : rec.kappa) {
        if (k && std::isfinite(*k)) log_kappa[rec.round].push_back(std::log10(*k));
      }
    }
  }
  for (auto& [round, values] : log_kappa) {
    std::sort(values.begin(), values.end());
    KappaRoundStats k;
    k.round = round;
    k.count = values.size();
    k.min_log10 = values.front();
    k.max_log10 = values.back();
    k.mean_log10 = std::accumulate(values.begin(), values.end(), 0.0) /
                   static_cast<double>(values.size());
    const std::size_t mid = values.size() / 2;
    k.median_log10 = values.size() % 2 == 1
                         ? values[mid]
                         : 0.5 * (values[mid - 1] + values[mid]);
    s.kappa.push_back(k);
  }
  return s;
}

std::vector<double> seed_scores(const std::vector<SeedRecords>& runs,
                                Split split, ExclusionPolicy policy) {
  std::vector<SeedOutcome> outcomes;
  for (const auto& r : runs) outcomes.push_back(seed_outcome(r));
  std::sort(outcomes.begin(), outcomes.end(),
            [](const SeedOutcome& a, const SeedOutcome& b) { return a.seed < b.seed; });
  std::vector<double> scores;
  for (const auto& o : outcomes) {
    if (excluded(o, policy)) continue;
    const auto& channels = split == Split::kTrain ? o.train_bfr : o.test_bfr;
    if (channels.empty()) continue;
    scores.push_back(std::accumulate(channels.begin(), channels.end(), 0.0) /
                     static_cast<double>(channels.size()));
  }
  return scores;
}

namespace {

bool has_ties(std::span<const double> a, std::span<const double> b) {
  std::vector<double> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  return std::adjacent_find(all.begin(), all.end()) != all.end();
}

// Mann-Whitney U of sample a: pairs (i, j) with a_i > b_j, ties count half.
double u_statistic(std::span<const double> a, std::span<const double> b) {
  double u = 0.0;
  for (double x : a) {
    for (double y : b) {
      if (x > y) u += 1.0;
      else if (x == y) u += 0.5;
    }
  }
  return u;
}

}  // namespace

double ranksum_exact(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), "ranksum_exact: empty sample");
  const std::size_t m = a.size(), n = b.size();
  require(m + n <= 60, "ranksum_exact: samples too large for exact counting");
  const auto u = static_cast<std::size_t>(std::llround(u_statistic(a, b)));

  // counts[i][j][k]: orderings of i a-values and j b-values with U = k.
  const std::size_t max_u = m * n;
  std::vector<std::vector<std::vector<double>>> counts(
      m + 1, std::vector<std::vector<double>>(n + 1, std::vector<double>(max_u + 1, 0.0)));
  for (std::size_t i = 0; i <= m; ++i) {
    for (std::size_t j = 0; j <= n; ++j) {
      if (i == 0 || j == 0) {
        counts[i][j][0] = 1.0;
        continue;
      }
      // The largest value is either an a (contributes j to U) or a b.
      for (std::size_t k = 0; k <= i * j; ++k) {
        double c = counts[i][j - 1][k];
        if (k >= j) c += counts[i - 1][j][k - j];
        counts[i][j][k] = c;
      }
    }
  }
  const auto& dist = counts[m][n];
  const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
  double lower = 0.0, upper = 0.0;
  for (std::size_t k = 0; k <= max_u; ++k) {
    if (k <= u) lower += dist[k];
    if (k >= u) upper += dist[k];
  }
  return std::min(1.0, 2.0 * std::min(lower, upper) / total);
}

double ranksum_normal(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), "ranksum_normal: empty sample");
  const double m = static_cast<double>(a.size());
  const double n = static_cast<double>(b.size());
  const double total = m + n;

  std::vector<double> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j] == all[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }

  const double u = u_statistic(a, b);
  const double mean = m * n / 2.0;
  const double var =
      m * n / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
  if (!(var > 0.0)) return 1.0;
  const double z = std::max(0.0, std::abs(u - mean) - 0.5) / std::sqrt(var);
  return std::clamp(std::erfc(z / std::sqrt(2.0)), 0.0, 1.0);
}

double ranksum_test(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), "ranksum_test: empty sample");
  if (a.size() + b.size() <= 12 && !has_ties(a, b)) return ranksum_exact(a, b);
  return ranksum_normal(a, b);
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

double parse_double(const std::string& text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw_error(ErrorCode::kParse, "not a number: '" + text + "'");
  }
  if (used != text.size()) {
    throw_error(ErrorCode::kParse, "not a number: '" + text + "'");
  }
  return v;
}

void write_results_csv(std::ostream& out, const std::vector<SeedRecords>& runs) {
  out << kResultsHeader << '\n';
  for (const auto& run : runs) {
    for (const auto& rec : run.rounds) {
      for (Split split : {Split::kTrain, Split::kTest}) {
        const auto& values = rec.bfr(split);
        for (std::size_t w = 0; w < values.size(); ++w) {
          const std::string kappa =
              w < rec.kappa.size() && rec.kappa[w] ? format_double(*rec.kappa[w]) : "";
          const std::string flag =
              w < rec.flags.size() ? rec.flags[w].to_string() : "ok";
          for (std::size_t p = 0; p < values[w].size(); ++p) {
            out << run.seed << ',' << rec.round << ',' << w << ','
                << to_string(split) << ',' << p << ','
                << format_double(values[w][p]) << ',' << kappa << ','
                << (rec.global_stable ? 1 : 0) << ',' << flag << '\n';
          }
        }
      }
    }
  }
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

template <typename T>
void grow(std::vector<T>& v, std::size_t size) {
  if (v.size() < size) v.resize(size);
}

}  // namespace

std::vector<SeedRecords> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw_error(ErrorCode::kSchema, "results CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsHeader) {
    throw_error(ErrorCode::kSchema,
                std::string("results CSV header must be '") + kResultsHeader + "'");
  }

  std::map<std::uint64_t, std::map<int, RoundRecord>> by_seed;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_fields(line);
    const std::string where = "results CSV line " + std::to_string(line_no);
    if (f.size() != 9) {
      throw_error(ErrorCode::kSchema, where + ": expected 9 fields, got " +
                                          std::to_string(f.size()));
    }
    try {
      const std::uint64_t seed = std::stoull(f[0]);
      const int round = std::stoi(f[1]);
      const auto worker = static_cast<std::size_t>(std::stoul(f[2]));
      const auto output = static_cast<std::size_t>(std::stoul(f[4]));
      Split split;
      if (f[3] == "train") split = Split::kTrain;
      else if (f[3] == "test") split = Split::kTest;
      else throw_error(ErrorCode::kParse, "unknown split '" + f[3] + "'");

      RoundRecord& rec = by_seed[seed][round];
      rec.round = round;
      auto& table = split == Split::kTrain ? rec.bfr_train : rec.bfr_test;
      grow(table, worker + 1);
      grow(table[worker], output + 1);
      table[worker][output] = parse_double(f[5]);
      grow(rec.kappa, worker + 1);
      if (!f[6].empty()) rec.kappa[worker] = parse_double(f[6]);
      grow(rec.flags, worker + 1);
      rec.flags[worker] = WorkerFlags::parse(f[8]);
      if (f[7] != "0" && f[7] != "1") {
        throw_error(ErrorCode::kParse, "global_stable must be 0 or 1");
      }
      rec.global_stable = f[7] == "1";
    } catch (const Error& e) {
      throw_error(ErrorCode::kParse, where + ": " + e.what());
    } catch (const std::exception& e) {
      throw_error(ErrorCode::kParse, where + ": malformed field");
    }
  }

  std::vector<SeedRecords> runs;
  for (auto& [seed, rounds] : by_seed) {
    SeedRecords r;
    r.seed = seed;
    for (auto& [round, rec] : rounds) r.rounds.push_back(std::move(rec));
    runs.push_back(std::move(r));
  }
  return runs;
}

}  // namespace fedsysid
