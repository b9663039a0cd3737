#include "envmix/io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <numeric>

namespace envmix::io {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot open for writing");
  return out;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string where(const std::string& path, int line, int column = 0) {
  std::string s = path + ":" + std::to_string(line);
  if (column > 0) s += ":" + std::to_string(column);
  return s;
}

/// Header plus numeric body; every row must have the header's width.
std::vector<std::vector<double>> read_table(const std::string& path, const std::string& prefix,
                                            bool single_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open");
  std::string line;
  int line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_fields(line);
      break;
    }
  }
  if (header.empty()) throw DataError(path + ": empty file");
  if (single_column) {
    if (header.size() != 1 || header[0] != prefix) {
      throw DataError(where(path, line_no) + ": expected header '" + prefix + "'");
    }
  } else {
    for (std::size_t j = 0; j < header.size(); ++j) {
      const std::string expected = prefix + std::to_string(j + 1);
      if (header[j] != expected) {
        throw DataError(where(path, line_no, static_cast<int>(j + 1)) + ": expected column '" +
                        expected + "', found '" + header[j] + "'");
      }
    }
  }

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw DataError(where(path, line_no) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const std::string& f = fields[j];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), row[j]);
      if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(row[j])) {
        throw DataError(where(path, line_no, static_cast<int>(j + 1)) + ": not a finite number: '" + f + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + ": no data rows");
  return rows;
}

}  // namespace

void write_matrix_csv(const std::string& path, const Matrix& m, const std::string& prefix) {
  auto out = open_out(path);
  for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << prefix << j + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
  if (!out) throw DataError(path + ": write failed");
}

void write_labels_csv(const std::string& path, const LabelVector& labels) {
  auto out = open_out(path);
  out << "label\n";
  for (int label : labels) out << label << '\n';
  if (!out) throw DataError(path + ": write failed");
}

Matrix read_matrix_csv(const std::string& path, const std::string& prefix) {
  const auto rows = read_table(path, prefix, false);
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

LabelVector read_labels_csv(const std::string& path) {
  const auto rows = read_table(path, "label", true);
  LabelVector labels;
  labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double v = rows[i][0];
    if (v != std::floor(v) || v < 1.0) {
      throw DataError(where(path, static_cast<int>(i + 2)) + ": labels must be positive integers");
    }
    labels.push_back(static_cast<int>(v));
  }
  return labels;
}

Dataset read_dataset(const std::string& x_path, const std::string& y_path,
                     const std::optional<std::string>& labels_path) {
  Matrix x = read_matrix_csv(x_path, "x");
  Matrix y = read_matrix_csv(y_path, "y");
  if (x.rows() != y.rows()) {
    throw DataError(x_path + " has " + std::to_string(x.rows()) + " rows but " + y_path + " has " +
                    std::to_string(y.rows()));
  }
  std::optional<LabelVector> labels;
  if (labels_path) {
    labels = read_labels_csv(*labels_path);
    if (static_cast<Eigen::Index>(labels->size()) != x.rows()) {
      throw DataError(*labels_path + " has " + std::to_string(labels->size()) + " rows, expected " +
                      std::to_string(x.rows()));
    }
  }
  return Dataset(std::move(x), std::move(y), std::move(labels));
}

Json RunManifest::to_json() const {
  Json j;
  j["command"] = command;
  j["inputs"] = inputs;
  j["output"] = output;
  j["options"] = options;
  j["version"] = version;
  j["timestamp"] = timestamp;
  return j;
}

std::string manifest_timestamp() {
  std::time_t t = 0;
  const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
  if (epoch && *epoch) {
    long long v = 0;
    const auto res = std::from_chars(epoch, epoch + std::strlen(epoch), v);
    if (res.ec != std::errc() || *res.ptr != '\0') throw DataError("SOURCE_DATE_EPOCH is not an integer");
    t = static_cast<std::time_t>(v);
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

/// Orthogonal Q = P D (column permutation then sign flips) that puts `basis`
/// into canonical form given the diagonal used for ordering.
Matrix canonical_rotation(const Matrix& basis, const Vector& order_key) {
  const auto k = basis.cols();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return order_key[a] > order_key[b]; });
  Matrix q = Matrix::Zero(k, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const Eigen::Index src = order[static_cast<std::size_t>(c)];
    double sign = 1.0;
    for (Eigen::Index i = 0; i < basis.rows(); ++i) {
      if (std::abs(basis(i, src)) > 1e-12) {
        sign = basis(i, src) > 0.0 ? 1.0 : -1.0;
        break;
      }
    }
    q(src, c) = sign;
  }
  return q;
}

}  // namespace

MixtureParams canonicalize(const MixtureParams& theta) {
  MixtureParams out = theta;
  const int u = theta.u();
  if (u > 0) {
    Vector key = Vector::Zero(u);
    for (int k = 0; k < theta.M(); ++k) key += theta.pi[k] * theta.groups[static_cast<std::size_t>(k)].Omega.diagonal();
    const Matrix q = canonical_rotation(theta.basis.Gamma, key);
    out.basis.Gamma = theta.basis.Gamma * q;
    for (auto& g : out.groups) {
      g.eta = q.transpose() * g.eta;
      g.Omega = q.transpose() * g.Omega * q;
    }
  }
  if (theta.r() - u > 0) {
    const Matrix q = canonical_rotation(theta.basis.Gamma0, theta.Omega0.diagonal());
    out.basis.Gamma0 = theta.basis.Gamma0 * q;
    out.Omega0 = q.transpose() * theta.Omega0 * q;
  }
  return out;
}

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_json(const Vector& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Json params_json(const MixtureParams& raw) {
  const MixtureParams theta = canonicalize(raw);
  Json j;
  j["M"] = theta.M();
  j["r"] = theta.r();
  j["p"] = theta.p();
  j["u"] = theta.u();
  j["pi"] = vector_json(theta.pi);
  j["Gamma"] = matrix_json(theta.basis.Gamma);
  j["Gamma0"] = matrix_json(theta.basis.Gamma0);
  j["Omega0"] = matrix_json(theta.Omega0);
  Json groups = Json::array();
  for (const auto& g : theta.groups) {
    Json gj;
    gj["mu"] = vector_json(g.mu);
    gj["eta"] = matrix_json(g.eta);
    gj["Omega"] = matrix_json(g.Omega);
    gj["beta"] = matrix_json(g.beta(theta.basis));
    gj["x_center"] = vector_json(g.x_center);
    groups.push_back(std::move(gj));
  }
  j["groups"] = std::move(groups);
  return j;
}

Json fit_json(const FitResult& fit) {
  Json j;
  j["theta"] = params_json(fit.theta);
  j["loglik"] = fit.loglik();
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["best_iteration"] = fit.best_iteration;
  j["seed"] = fit.seed_used;
  j["chain"] = fit.chain;
  j["restarts"] = fit.restarts;
  j["repairs"] = fit.repairs;
  j["loglik_trace"] = fit.loglik_trace;
  j["labels"] = fit.labels;
  j["responsibilities"] = matrix_json(fit.responsibilities);
  return j;
}

Json selection_json(const SelectionReport& report) {
  Json j;
  j["n"] = report.n;
  j["best"] = {{"M", report.best_M}, {"u", report.best_u}};
  Json grid = Json::array();
  for (const auto& cell : report.grid) {
    Json c;
    c["M"] = cell.M;
    c["u"] = cell.u;
    c["ok"] = cell.ok;
    c["free_params"] = cell.free_params;
    if (cell.ok) {
      c["bic"] = cell.bic;
      c["loglik"] = cell.loglik;
    } else {
      c["bic"] = nullptr;
      c["loglik"] = nullptr;
      c["error"] = cell.error;
    }
    grid.push_back(std::move(c));
  }
  j["grid"] = std::move(grid);
  return j;
}

void write_json(const std::string& path, const Json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
  if (!out) throw DataError(path + ": write failed");
}

}  // namespace envmix::io
