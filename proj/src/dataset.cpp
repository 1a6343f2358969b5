#include "fedsysid/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fedsysid/error.hpp"
#include "fedsysid/metrics.hpp"

namespace fedsysid {

TimeSeriesDataset generate_worker_dataset(const SyntheticSystemSpec& spec, Rng& rng) {
  const auto& m = spec.truth_model;
  require(spec.samples > 0, "synthetic dataset needs a positive sample count");
  require(spec.x1_std >= 0.0 && spec.u_std >= 0.0 && spec.w_std >= 0.0 &&
              spec.v_std >= 0.0,
          "synthetic noise deviations must be nonnegative");
  if (!is_stable(m)) {
    throw_error(ErrorCode::kUnstableTruth,
                "refusing to generate data from an unstable truth model");
  }
  const Eigen::Index steps = spec.samples;
  const Vector x1 = gaussian_matrix(rng, m.nx(), 1, spec.x1_std).col(0);
  const Matrix u = gaussian_matrix(rng, m.nu(), steps, spec.u_std);
  const Matrix w = gaussian_matrix(rng, m.nx(), steps, spec.w_std);
  const Matrix v = gaussian_matrix(rng, m.ny(), steps, spec.v_std);

  TimeSeriesDataset data;
  data.inputs = u;
  data.outputs.resize(m.ny(), steps);
  Vector x = x1;
  for (Eigen::Index k = 0; k < steps; ++k) {
    data.outputs.col(k) = m.C() * x + m.D() * u.col(k);
    data.outputs.col(k) += v.col(k);
    Vector next = m.A() * x + m.B() * u.col(k);
    next += w.col(k);
    x.swap(next);
  }
  return data;
}

StateSpaceModel siso_truth_model(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> pole_dist(0.3, 0.9);
  std::uniform_real_distribution<double> zero_dist(-0.5, 0.5);
  double poles[3];
  double zero = 0.0;
  // Redraw until the poles are separated and the zero sits away from them.
  for (;;) {
    for (double& p : poles) p = pole_dist(rng);
    zero = zero_dist(rng);
    double pole_gap = 1.0, zero_gap = 1.0;
    for (int i = 0; i < 3; ++i) {
      zero_gap = std::min(zero_gap, std::abs(zero - poles[i]));
      for (int j = i + 1; j < 3; ++j) {
        pole_gap = std::min(pole_gap, std::abs(poles[i] - poles[j]));
      }
    }
    if (pole_gap >= kSisoMinPoleGap && zero_gap >= kSisoMinZeroGap) break;
  }

  // (z - p1)(z - p2)(z - p3) = z^3 + a1 z^2 + a2 z + a3
  Vector coeffs(3);
  coeffs << -(poles[0] + poles[1] + poles[2]),
      poles[0] * poles[1] + poles[0] * poles[2] + poles[1] * poles[2],
      -poles[0] * poles[1] * poles[2];
  const double den_at_one = (1 - poles[0]) * (1 - poles[1]) * (1 - poles[2]);
  const double gain = den_at_one / (1.0 - zero);

  Matrix b = Matrix::Zero(3, 1);
  b(2, 0) = 1.0;
  Matrix c(1, 3);
  c << -gain * zero, gain, 0.0;
  return StateSpaceModel(companion_matrix(coeffs), b, c, Matrix::Zero(1, 1));
}

StateSpaceModel mimo1_truth_model() {
  Matrix a(4, 4), b(4, 2), c(2, 4);
  // clang-format off
  a <<  0.80, 0.20, 0.00, 0.00,
       -0.20, 0.80, 0.00, 0.00,
        0.00, 0.00, 0.50, 0.30,
        0.00, 0.00,-0.30, 0.50;
  b <<  1.00, 0.40,
        0.50, 0.80,
        0.30, 1.00,
        0.90, 0.20;
  c <<  1.00, 0.00, 0.50, 0.00,
        0.00, 0.40, 1.00, 0.20;
  // clang-format on
  return StateSpaceModel(a, b, c, Matrix::Zero(2, 2));
}

StateSpaceModel mimo2_truth_model() {
  Matrix a(4, 4), b(4, 2), c(2, 4);
  // clang-format off
  a <<  0.90, 0.15, 0.00, 0.00,
       -0.15, 0.90, 0.00, 0.00,
        0.00, 0.00, 0.60, 0.25,
        0.00, 0.00,-0.25, 0.60;
  b <<  1.00, 0.002,
        0.60, 0.001,
        0.40, 1.00,
        0.20, 0.70;
  c <<  1.00, 0.30, 0.60, 0.00,
        0.00, 0.50, 1.00, 0.40;
  // clang-format on
  return StateSpaceModel(a, b, c, Matrix::Zero(2, 2));
}

TimeSeriesDataset slice(const TimeSeriesDataset& data, IndexRange range) {
  if (range.begin < 0 || range.end > data.length() || range.begin >= range.end) {
    throw_error(ErrorCode::kBounds,
                "range [" + std::to_string(range.begin) + ", " +
                    std::to_string(range.end) + ") is outside a series of length " +
                    std::to_string(data.length()));
  }
  return {data.inputs.middleCols(range.begin, range.length()),
          data.outputs.middleCols(range.begin, range.length())};
}

std::pair<TimeSeriesDataset, TimeSeriesDataset> split(const TimeSeriesDataset& data,
                                                      const SplitSpec& spec) {
  return {slice(data, spec.train), slice(data, spec.test)};
}

TimeSeriesDataset detrend(const TimeSeriesDataset& data) {
  require(data.length() >= 1, "detrend: empty dataset");
  TimeSeriesDataset out = data;
  out.inputs.colwise() -= data.inputs.rowwise().mean();
  out.outputs.colwise() -= data.outputs.rowwise().mean();
  return out;
}

namespace {

void normalize_rows(Matrix& m, std::vector<double>& means, std::vector<double>& stds,
                    const char* kind) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mean = m.row(r).mean();
    const double var = (m.row(r).array() - mean).square().mean();
    const double sd = std::sqrt(var);
    if (!(sd > 0.0)) {
      throw_error(ErrorCode::kDegenerateChannel,
                  std::string(kind) + " channel " + std::to_string(r + 1) +
                      " has zero variance");
    }
    m.row(r) = (m.row(r).array() - mean) / sd;
    means.push_back(mean);
    stds.push_back(sd);
  }
}

}  // namespace

std::pair<TimeSeriesDataset, NormalizationStats> normalize(const TimeSeriesDataset& data) {
  require(data.length() >= 1, "normalize: empty dataset");
  TimeSeriesDataset out = data;
  NormalizationStats stats;
  normalize_rows(out.inputs, stats.mean, stats.std, "input");
  normalize_rows(out.outputs, stats.mean, stats.std, "output");
  return {std::move(out), std::move(stats)};
}

TimeSeriesDataset denormalize(const TimeSeriesDataset& data,
                              const NormalizationStats& stats) {
  const auto nu = static_cast<std::size_t>(data.nu());
  require(stats.mean.size() == nu + static_cast<std::size_t>(data.ny()) &&
              stats.std.size() == stats.mean.size(),
          "normalization statistics do not match the channel count");
  TimeSeriesDataset out = data;
  for (Eigen::Index r = 0; r < out.inputs.rows(); ++r) {
    const auto i = static_cast<std::size_t>(r);
    out.inputs.row(r) = out.inputs.row(r).array() * stats.std[i] + stats.mean[i];
  }
  for (Eigen::Index r = 0; r < out.outputs.rows(); ++r) {
    const auto i = nu + static_cast<std::size_t>(r);
    out.outputs.row(r) = out.outputs.row(r).array() * stats.std[i] + stats.mean[i];
  }
  return out;
}

nlohmann::json stats_to_json(const NormalizationStats& stats) {
  return {{"mean", stats.mean}, {"std", stats.std}};
}

NormalizationStats stats_from_json(const nlohmann::json& j) {
  NormalizationStats s;
  try {
    s.mean = j.at("mean").get<std::vector<double>>();
    s.std = j.at("std").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw_error(ErrorCode::kSchema, std::string("normalization stats: ") + e.what());
  }
  if (s.mean.size() != s.std.size()) {
    throw_error(ErrorCode::kSchema, "normalization stats: mean/std length mismatch");
  }
  return s;
}

TimeSeriesDataset add_output_noise(const TimeSeriesDataset& data,
                                   const std::vector<double>& v_std, Rng& rng) {
  require(static_cast<int>(v_std.size()) == data.ny(),
          "add_output_noise: " + std::to_string(v_std.size()) +
              " deviations for " + std::to_string(data.ny()) + " outputs");
  TimeSeriesDataset out = data;
  for (std::size_t p = 0; p < v_std.size(); ++p) {
    require(v_std[p] >= 0.0, "add_output_noise: negative deviation");
    if (v_std[p] == 0.0) continue;
    std::normal_distribution<double> normal(0.0, v_std[p]);
    const auto row = static_cast<Eigen::Index>(p);
    for (Eigen::Index k = 0; k < out.length(); ++k) out.outputs(row, k) += normal(rng);
  }
  return out;
}

namespace {

std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) {
    const auto first = f.find_first_not_of(" \t");
    const auto last = f.find_last_not_of(" \t");
    fields.push_back(first == std::string::npos ? "" : f.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

bool is_number(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

}  // namespace

TimeSeriesDataset read_csv(std::istream& in, int nu, int ny) {
  require(nu > 0 && ny > 0, "read_csv: channel counts must be positive");
  const auto needed = static_cast<std::size_t>(nu + ny);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line.erase(0, 3);
    }
    if (line.empty()) continue;
    const auto fields = csv_fields(line);
    if (line_no == 1 && !fields.empty() && !is_number(fields.front())) continue;
    if (columns == 0) columns = fields.size();
    if (fields.size() != columns || fields.size() < needed) {
      throw_error(ErrorCode::kSchema,
                  "line " + std::to_string(line_no) + ": expected " +
                      std::to_string(std::max(columns, needed)) + " columns, got " +
                      std::to_string(fields.size()));
    }
    std::vector<double> values;
    for (std::size_t c = 0; c < needed; ++c) {
      if (!is_number(fields[c])) {
        throw_error(ErrorCode::kParse, "line " + std::to_string(line_no) +
                                           ": field " + std::to_string(c + 1) +
                                           " is not a number: '" + fields[c] + "'");
      }
      values.push_back(std::strtod(fields[c].c_str(), nullptr));
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw_error(ErrorCode::kSchema, "CSV contains no samples");

  TimeSeriesDataset data;
  const auto steps = static_cast<Eigen::Index>(rows.size());
  data.inputs.resize(nu, steps);
  data.outputs.resize(ny, steps);
  for (Eigen::Index k = 0; k < steps; ++k) {
    const auto& r = rows[static_cast<std::size_t>(k)];
    for (int i = 0; i < nu; ++i) data.inputs(i, k) = r[static_cast<std::size_t>(i)];
    for (int p = 0; p < ny; ++p) {
      data.outputs(p, k) = r[static_cast<std::size_t>(nu + p)];
    }
  }
  return data;
}

TimeSeriesDataset load_csv(const std::filesystem::path& path, int nu, int ny) {
  std::ifstream in(path);
  if (!in) throw_error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return read_csv(in, nu, ny);
  } catch (const Error& e) {
    throw_error(e.code(), path.string() + ": " + e.what());
  }
}

void write_csv(std::ostream& out, const TimeSeriesDataset& data) {
  for (int i = 0; i < data.nu(); ++i) out << (i ? "," : "") << 'u' << i + 1;
  for (int p = 0; p < data.ny(); ++p) out << ",y" << p + 1;
  out << '\n';
  for (Eigen::Index k = 0; k < data.length(); ++k) {
    for (int i = 0; i < data.nu(); ++i) {
      out << (i ? "," : "") << format_double(data.inputs(i, k));
    }
    for (int p = 0; p < data.ny(); ++p) out << ',' << format_double(data.outputs(p, k));
    out << '\n';
  }
}

void save_csv(const std::filesystem::path& path, const TimeSeriesDataset& data) {
  std::ofstream out(path);
  if (!out) throw_error(ErrorCode::kIo, "cannot write " + path.string());
  write_csv(out, data);
  if (!out) throw_error(ErrorCode::kIo, "failed writing " + path.string());
}

}  // namespace fedsysid
