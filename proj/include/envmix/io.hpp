#pragma once

#include "envmix/icc.hpp"
#include "envmix/model_selection.hpp"
#include "envmix/types.hpp"

#include "json.hpp"

#include <map>
#include <optional>
#include <string>

namespace envmix::io {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// CSV: header row `<prefix>1,...,<prefix>k`, one observation per line.

/// Shortest decimal that round-trips the double exactly (17 significant
/// digits at most, never fewer than needed).
std::string format_double(double value);

void write_matrix_csv(const std::string& path, const Matrix& m, const std::string& prefix);
void write_labels_csv(const std::string& path, const LabelVector& labels);

/// Throws DataError with "<path>:<line>[:<column>]: ..." on malformed input.
Matrix read_matrix_csv(const std::string& path, const std::string& prefix);
LabelVector read_labels_csv(const std::string& path);

/// Reads X.csv / Y.csv (and optionally labels.csv), checking row counts agree.
Dataset read_dataset(const std::string& x_path, const std::string& y_path,
                     const std::optional<std::string>& labels_path = std::nullopt);

// ---------------------------------------------------------------------------
// JSON

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> inputs;
  std::string output;
  Json options = Json::object();
  std::string version;
  std::string timestamp;  // ISO 8601 UTC

  Json to_json() const;
};

/// UTC timestamp from SOURCE_DATE_EPOCH when set, the wall clock otherwise.
std::string manifest_timestamp();

/// Fixes the sign and order of the basis columns so equivalent fits serialize
/// identically: the first nonzero entry of every column of Gamma and Gamma0
/// is positive, Gamma columns are ordered by descending diagonal of
/// sum_k pi_k Omega_k and Gamma0 columns by descending diagonal of Omega0.
/// eta, Omega and Omega0 are transformed to match; beta is unchanged.
MixtureParams canonicalize(const MixtureParams& theta);

Json matrix_json(const Matrix& m);  // array of rows
Json vector_json(const Vector& v);
Json params_json(const MixtureParams& theta);  // canonicalizes first
Json fit_json(const FitResult& fit);
Json selection_json(const SelectionReport& report);

void write_json(const std::string& path, const Json& doc);

}  // namespace envmix::io
