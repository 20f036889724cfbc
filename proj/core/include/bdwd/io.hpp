#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bdwd/intervals.hpp"
#include "bdwd/model.hpp"
#include "bdwd/sampler.hpp"
#include "bdwd/simlab.hpp"
#include "bdwd/types.hpp"

namespace bdwd::io {

/// printf "%.17g"; non-finite values as nan, inf, -inf.
std::string format_double(double x);

struct IngestOptions {
  std::string label_column = "y";
  /// Map labels 0 -> -1 and 1 -> +1 instead of requiring {-1, +1}.
  bool zero_one_labels = false;
  /// Center each feature and scale it to unit sd (constant features are only centered).
  bool standardize = false;
  double P1 = 0.5;
  /// Accept files without the label column, marking every sample unlabeled.
  bool labels_optional = false;
};

struct IngestResult {
  Dataset data;
  std::vector<std::string> feature_names;
  std::vector<std::string> warnings;
};

/// Header row, one sample per row. Labels accept -1, 1, +1, NA, and empty
/// (the last two meaning unlabeled). Errors carry 1-based row and column numbers.
IngestResult ingest_csv(const std::filesystem::path& path, const IngestOptions& options = {});
IngestResult parse_csv(const std::string& text, const IngestOptions& options = {});

/// Writes features then the label column ("y"); unlabeled entries are written as NA.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data,
                       const std::vector<std::string>& feature_names = {});

/// beta0, beta_1..beta_d, lambda, log_post (and p1 when inferred), one row per draw.
void write_draws_csv(const std::filesystem::path& path, const PosteriorDraws& draws);

/// Acceptance rates, adaptation trace, and the sampler configuration.
void write_diagnostics_json(const std::filesystem::path& path, const PosteriorDraws& draws,
                            const SamplerConfig& config);

/// param, estimate, lower, upper, method.
void write_intervals_csv(const std::filesystem::path& path, const std::vector<IntervalSet>& sets);

/// Retained states of a draws CSV; log_post and p1 columns are read when present.
PosteriorDraws read_draws_csv(const std::filesystem::path& path);

/// row_id, p_mean, p_mode, class. Row ids default to 1..n.
void write_probabilities_csv(const std::filesystem::path& path, const Vector& p_mean,
                             const Vector& p_mode, const std::vector<std::int64_t>& row_ids = {});

/// beta0, beta_1..beta_d for a single state; lambda is not stored.
void write_mode_csv(const std::filesystem::path& path, const ModelState& state);
ModelState read_mode_csv(const std::filesystem::path& path);

inline constexpr int kPhiTableVersion = 1;

std::string phi_table_to_json(const PhiTable& table, const std::string& cache_key);
/// Throws ConfigError on a version or schema mismatch.
PhiTable phi_table_from_json(const std::string& text, std::string* cache_key = nullptr);

/// FNV-1a over the bytes of X, P1, beta0_ref, the grid definition, T, and seed.
std::string phi_cache_key(const Dataset& data, double beta0_ref, const LambdaPrior& prior,
                          const PhiOptions& options, std::uint64_t seed);

/// Loads `path` when it holds a table with the same cache key, otherwise
/// estimates the table and writes it there. `hit` reports which happened.
PhiTable cached_phi_table(const std::filesystem::path& path, const Dataset& data,
                          const LambdaPrior& prior, double beta0, std::uint64_t seed,
                          const PhiOptions& options, std::string* cache_key, bool* hit);

/// One row per replication with every metric.
void write_sim_records_csv(const std::filesystem::path& path, const SimReport& report);
void write_table1_csv(const std::filesystem::path& path, const std::vector<Table1Row>& rows);
void write_table2_csv(const std::filesystem::path& path, const std::vector<Table2Row>& rows);
void write_table3_csv(const std::filesystem::path& path, const std::vector<Table3Row>& rows);
struct CalibrationSeries {
  std::string estimator;
  std::vector<CalibrationBin> bins;
};

/// estimator, lower, upper, midpoint, count, positives, proportion (NA when empty).
void write_calibration_csv(const std::filesystem::path& path,
                           const std::vector<CalibrationSeries>& series);

std::string read_text(const std::filesystem::path& path);
/// Writes through a temporary file in the same directory, then renames.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace bdwd::io
