#include "bdwd/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include <json.hpp>

#include "bdwd/error.hpp"
#include "bdwd/stats.hpp"

namespace bdwd::io {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string coord(std::size_t row, std::size_t col) {
  return "row " + std::to_string(row) + ", column " + std::to_string(col);
}

/// RFC 4180 field splitting for one record; quotes may wrap a field and "" escapes a quote.
std::vector<std::string> split_record(const std::string& line, std::size_t row) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && field.empty() && !was_quoted) {
      quoted = was_quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw InvalidArgument("unterminated quoted field at row " + std::to_string(row));
  out.push_back(std::move(field));
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& text, double& value) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  if (first == last) return false;
  auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last;
}

Label parse_label(const std::string& raw, bool zero_one, std::size_t row, std::size_t col) {
  const std::string s = trim(raw);
  if (s.empty() || s == "NA") return Label::unlabeled;
  if (zero_one) {
    if (s == "0") return Label::negative;
    if (s == "1") return Label::positive;
    throw InvalidArgument("label '" + s + "' at " + coord(row, col) +
                          " is not one of 0, 1, NA, or empty");
  }
  if (s == "-1") return Label::negative;
  if (s == "1" || s == "+1") return Label::positive;
  throw InvalidArgument("label '" + s + "' at " + coord(row, col) +
                        " is not one of -1, 1, +1, NA, or empty");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string state_header(Eigen::Index d) {
  std::string h = "beta0";
  for (Eigen::Index j = 0; j < d; ++j) h += ",beta_" + std::to_string(j + 1);
  return h;
}

std::string na_or(double x) { return std::isnan(x) ? std::string("NA") : format_double(x); }

json config_json(const SamplerConfig& c) {
  return json{{"n_iter", c.n_iter},
              {"burn_in", c.effective_burn_in()},
              {"thin", c.thin},
              {"infer_lambda", c.infer_lambda},
              {"fixed_lambda", c.fixed_lambda},
              {"seed", c.seed},
              {"initial_proposal_sd", c.initial_proposal_sd},
              {"beta0_proposal_sd", c.beta0_proposal_sd},
              {"beta0_proposal",
               c.beta0_proposal == Beta0Proposal::centered ? "centered" : "random-walk"},
              {"fixed_beta0", c.fixed_beta0 ? json(*c.fixed_beta0) : json(nullptr)},
              {"lambda_step_sd", c.lambda_step_sd},
              {"infer_p1", c.infer_p1},
              {"p1_step_sd", c.p1_step_sd},
              {"refresh_every", c.refresh_every},
              {"verify_every", c.verify_every}};
}

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

template <typename T>
void fnv_value(std::uint64_t& h, T value) {
  fnv_bytes(h, &value, sizeof(T));
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ResourceError("cannot open '" + tmp.string() + "' for writing");
    out << text;
    if (!out) throw ResourceError("failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

IngestResult parse_csv(const std::string& text, const IngestOptions& options) {
  if (!(options.P1 > 0.0 && options.P1 < 1.0)) throw ConfigError("P1 must be in (0,1)");
  std::vector<std::string> lines;
  {
    std::size_t start = 0;
    while (start <= text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      std::string line = text.substr(start, end - start);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(std::move(line));
      start = end + 1;
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
  }
  if (lines.empty()) throw InvalidArgument("CSV input is empty");
  if (lines[0].rfind("\xEF\xBB\xBF", 0) == 0) lines[0].erase(0, 3);

  const std::vector<std::string> header = split_record(lines[0], 1);
  std::size_t label_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c)
    if (trim(header[c]) == options.label_column) {
      if (label_col != header.size())
        throw InvalidArgument("label column '" + options.label_column + "' appears twice");
      label_col = c;
    }
  const bool has_labels = label_col != header.size();
  if (!has_labels && !options.labels_optional)
    throw InvalidArgument("label column '" + options.label_column + "' not found in header");
  if (header.size() < (has_labels ? 2u : 1u))
    throw InvalidArgument("CSV needs at least one feature column");

  IngestResult out;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != label_col) out.feature_names.push_back(trim(header[c]));
  const auto d = static_cast<Eigen::Index>(out.feature_names.size());
  const auto n = static_cast<Eigen::Index>(lines.size() - 1);
  if (n < 1) throw InvalidArgument("CSV holds a header but no samples");

  out.data.X.resize(d, n);
  out.data.y.resize(static_cast<std::size_t>(n));
  out.data.P1 = options.P1;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t row = static_cast<std::size_t>(i) + 2;
    const auto fields = split_record(lines[static_cast<std::size_t>(i) + 1], row);
    if (fields.size() != header.size())
      throw InvalidArgument("row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                            " fields, header has " + std::to_string(header.size()));
    Eigen::Index j = 0;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (c == label_col) {
        out.data.y[static_cast<std::size_t>(i)] =
            parse_label(fields[c], options.zero_one_labels, row, c + 1);
        continue;
      }
      double v = 0.0;
      const std::string cell = trim(fields[c]);
      if (!parse_number(cell, v) || !std::isfinite(v))
        throw InvalidArgument("feature value '" + cell + "' at " + coord(row, c + 1) +
                              " is not a finite number");
      out.data.X(j++, i) = v;
    }
  }

  if (options.standardize) {
    for (Eigen::Index j = 0; j < d; ++j) {
      auto xj = out.data.X.row(j);
      const double mu = xj.mean();
      xj.array() -= mu;
      const double sd = n > 1 ? std::sqrt(xj.squaredNorm() / static_cast<double>(n - 1)) : 0.0;
      if (sd > 0.0)
        xj /= sd;
      else
        out.warnings.push_back("feature '" + out.feature_names[static_cast<std::size_t>(j)] +
                               "' is constant; centered only");
    }
  }
  out.data.validate();
  return out;
}

IngestResult ingest_csv(const fs::path& path, const IngestOptions& options) {
  return parse_csv(read_text(path), options);
}

void write_dataset_csv(const fs::path& path, const Dataset& data,
                       const std::vector<std::string>& feature_names) {
  data.validate();
  if (!feature_names.empty() && static_cast<Eigen::Index>(feature_names.size()) != data.dim())
    throw InvalidArgument("feature name count does not match the dimension");
  std::string s;
  for (Eigen::Index j = 0; j < data.dim(); ++j)
    s += csv_field(feature_names.empty() ? "x" + std::to_string(j + 1)
                                         : feature_names[static_cast<std::size_t>(j)]) +
         ",";
  s += "y\n";
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < data.dim(); ++j) s += format_double(data.X(j, i)) + ",";
    const Label y = data.y[static_cast<std::size_t>(i)];
    s += y == Label::unlabeled ? "NA" : (y == Label::positive ? "1" : "-1");
    s += "\n";
  }
  write_text(path, s);
}

void write_draws_csv(const fs::path& path, const PosteriorDraws& draws) {
  const bool with_p1 = !draws.p1.empty();
  std::string s = state_header(draws.dim()) + ",lambda,log_post" + (with_p1 ? ",p1" : "") + "\n";
  for (std::size_t t = 0; t < draws.size(); ++t) {
    const ModelState& st = draws.states[t];
    s += format_double(st.beta0);
    for (Eigen::Index j = 0; j < st.beta.size(); ++j) s += "," + format_double(st.beta[j]);
    s += "," + format_double(st.lambda) + "," + format_double(draws.log_post[t]);
    if (with_p1) s += "," + format_double(draws.p1[t]);
    s += "\n";
  }
  write_text(path, s);
}

void write_diagnostics_json(const fs::path& path, const PosteriorDraws& draws,
                            const SamplerConfig& config) {
  json j;
  j["retained_draws"] = draws.size();
  j["accept_beta"] = draws.accept_beta;
  j["accept_beta0"] = draws.accept_beta0;
  j["lambda_inferred"] = draws.lambda_inferred;
  if (draws.lambda_inferred) {
    j["accept_lambda"] = draws.accept_lambda;
    j["lambda_out_of_range"] = draws.lambda_out_of_range;
    j["phi_table_beta0_fixed"] = true;
  }
  if (!draws.p1.empty()) j["accept_p1"] = draws.accept_p1;
  j["mode"] = {{"beta0", draws.mode.beta0},
               {"beta", std::vector<double>(draws.mode.beta.data(),
                                            draws.mode.beta.data() + draws.mode.beta.size())},
               {"lambda", draws.mode.lambda}};
  j["proposal_sd_trace"] = draws.proposal_sd_trace;
  j["config"] = config_json(config);
  write_text(path, j.dump(2) + "\n");
}

void write_intervals_csv(const fs::path& path, const std::vector<IntervalSet>& sets) {
  std::string s = "param,estimate,lower,upper,method\n";
  for (const auto& set : sets)
    for (const auto& r : to_rows(set))
      s += r.param + "," + format_double(r.estimate) + "," + format_double(r.lower) + "," +
           format_double(r.upper) + "," + csv_field(r.method) + "\n";
  write_text(path, s);
}

void write_probabilities_csv(const fs::path& path, const Vector& p_mean, const Vector& p_mode,
                             const std::vector<std::int64_t>& row_ids) {
  if (p_mean.size() != p_mode.size()) throw InvalidArgument("probability vectors differ in length");
  if (!row_ids.empty() && static_cast<Eigen::Index>(row_ids.size()) != p_mean.size())
    throw InvalidArgument("row id count does not match the probability vectors");
  std::string s = "row_id,p_mean,p_mode,class\n";
  for (Eigen::Index i = 0; i < p_mean.size(); ++i)
    s += std::to_string(row_ids.empty() ? i + 1 : row_ids[static_cast<std::size_t>(i)]) + "," + format_double(p_mean[i]) + "," + format_double(p_mode[i]) +
         "," + (p_mean[i] >= 0.5 ? "1" : "-1") + "\n";
  write_text(path, s);
}

void write_mode_csv(const fs::path& path, const ModelState& state) {
  std::string s = state_header(state.beta.size()) + "\n" + format_double(state.beta0);
  for (Eigen::Index j = 0; j < state.beta.size(); ++j) s += "," + format_double(state.beta[j]);
  s += "\n";
  write_text(path, s);
}

ModelState read_mode_csv(const fs::path& path) {
  const std::string text = read_text(path);
  std::istringstream in(text);
  std::string header, values;
  std::getline(in, header);
  std::getline(in, values);
  if (!values.empty() && values.back() == '\r') values.pop_back();
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const auto names = split_record(header, 1);
  const auto cells = split_record(values, 2);
  if (names.size() < 2 || names.size() != cells.size() || names.front() != "beta0")
    throw InvalidArgument("'" + path.string() + "' is not a mode file (beta0, beta_1, ...)");
  std::vector<double> v(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c)
    if (!parse_number(trim(cells[c]), v[c]))
      throw InvalidArgument("mode value at " + coord(2, c + 1) + " is not a number");
  ModelState st;
  st.beta0 = v.front();
  st.beta = Eigen::Map<const Vector>(v.data() + 1, static_cast<Eigen::Index>(v.size() - 1));
  return st;
}

PosteriorDraws read_draws_csv(const fs::path& path) {
  const std::string text = read_text(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("'" + path.string() + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto names = split_record(line, 1);
  std::size_t d = 0;
  while (1 + d < names.size() && names[1 + d] == "beta_" + std::to_string(d + 1)) ++d;
  if (names.empty() || names[0] != "beta0" || d == 0 || names.size() < d + 2 ||
      names[d + 1] != "lambda")
    throw InvalidArgument("'" + path.string() + "' is not a draws file");
  const bool has_lp = names.size() > d + 2 && names[d + 2] == "log_post";
  const bool has_p1 = names.size() > d + 3 && names[d + 3] == "p1";
  PosteriorDraws draws;
  draws.lambda_inferred = false;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_record(line, row);
    if (cells.size() != names.size())
      throw InvalidArgument("row " + std::to_string(row) + " of '" + path.string() +
                            "' has the wrong number of fields");
    std::vector<double> v(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c)
      if (!parse_number(trim(cells[c]), v[c]))
        throw InvalidArgument("draw value at " + coord(row, c + 1) + " is not a number");
    ModelState st;
    st.beta0 = v[0];
    st.beta = Eigen::Map<const Vector>(v.data() + 1, static_cast<Eigen::Index>(d));
    st.lambda = v[d + 1];
    draws.states.push_back(std::move(st));
    if (has_lp) draws.log_post.push_back(v[d + 2]);
    if (has_p1) draws.p1.push_back(v[d + 3]);
  }
  if (draws.states.empty()) throw InvalidArgument("'" + path.string() + "' holds no draws");
  draws.mode = draws.states.front();
  return draws;
}

std::string phi_table_to_json(const PhiTable& table, const std::string& cache_key) {
  table.validate();
  json j;
  j["version"] = kPhiTableVersion;
  j["cache_key"] = cache_key;
  j["mc_samples"] = table.mc_samples;
  j["seed"] = table.seed;
  j["beta0_ref"] = format_double(table.beta0_ref);
  j["P1"] = format_double(table.P1);
  json grid = json::array(), vals = json::array();
  for (double l : table.lambda_grid) grid.push_back(format_double(l));
  for (double v : table.log_phi) vals.push_back(format_double(v));
  j["lambda_grid"] = grid;
  j["log_phi"] = vals;
  return j.dump(2) + "\n";
}

PhiTable phi_table_from_json(const std::string& text, std::string* cache_key) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("phi table is not valid JSON: ") + e.what());
  }
  auto num = [](const json& v, const char* what) {
    double x = 0.0;
    if (!v.is_string() || !parse_number(v.get<std::string>(), x))
      throw ConfigError(std::string("phi table field '") + what + "' is malformed");
    return x;
  };
  try {
    if (j.at("version").get<int>() != kPhiTableVersion)
      throw ConfigError("phi table version " + std::to_string(j.at("version").get<int>()) +
                        " is not supported");
    PhiTable t;
    t.mc_samples = j.at("mc_samples").get<std::int64_t>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.beta0_ref = num(j.at("beta0_ref"), "beta0_ref");
    t.P1 = num(j.at("P1"), "P1");
    for (const auto& v : j.at("lambda_grid")) t.lambda_grid.push_back(num(v, "lambda_grid"));
    for (const auto& v : j.at("log_phi")) t.log_phi.push_back(num(v, "log_phi"));
    if (cache_key) *cache_key = j.at("cache_key").get<std::string>();
    t.validate();
    return t;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("phi table schema error: ") + e.what());
  }
}

std::string phi_cache_key(const Dataset& data, double beta0_ref, const LambdaPrior& prior,
                          const PhiOptions& options, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  fnv_value(h, static_cast<std::int64_t>(data.dim()));
  fnv_value(h, static_cast<std::int64_t>(data.size()));
  fnv_bytes(h, data.X.data(), sizeof(double) * static_cast<std::size_t>(data.X.size()));
  fnv_value(h, data.P1);
  fnv_value(h, beta0_ref);
  fnv_value(h, prior.lower);
  fnv_value(h, prior.upper);
  fnv_value(h, static_cast<std::int64_t>(options.grid_points));
  fnv_value(h, options.mc_samples);
  fnv_value(h, seed);
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

PhiTable cached_phi_table(const fs::path& path, const Dataset& data, const LambdaPrior& prior,
                          double beta0, std::uint64_t seed, const PhiOptions& options,
                          std::string* cache_key, bool* hit) {
  const std::string key = phi_cache_key(data, beta0, prior, options, seed);
  if (cache_key) *cache_key = key;
  if (!path.empty() && fs::exists(path)) {
    std::string stored;
    PhiTable t = phi_table_from_json(read_text(path), &stored);
    if (stored == key) {
      if (hit) *hit = true;
      return t;
    }
  }
  if (hit) *hit = false;
  PhiTable t = estimate_phi_table(data, prior, beta0, seed, options);
  if (!path.empty()) write_text(path, phi_table_to_json(t, key));
  return t;
}

void write_sim_records_csv(const fs::path& path, const SimReport& report) {
  std::string s =
      "replication,mcmc_beta,mcmc_u,clt_beta,clt_u,boot_beta,boot_u,"
      "mcmc_width_beta,clt_width_beta,boot_width_beta,lambda_mean,kl,kl_clamped,mse,"
      "misclass,accept_beta,lambda_out_of_range,boot_redraws\n";
  for (const auto& r : report.records) {
    s += std::to_string(r.replication);
    for (double v : {r.mcmc.beta, r.mcmc.u, r.clt.beta, r.clt.u, r.boot.beta, r.boot.u,
                     r.mcmc.width_beta, r.clt.width_beta, r.boot.width_beta, r.lambda_mean, r.kl})
      s += "," + na_or(v);
    s += "," + std::to_string(r.kl_clamped);
    for (double v : {r.mse, r.misclass, r.accept_beta}) s += "," + na_or(v);
    s += "," + std::to_string(r.lambda_out_of_range) + "," + std::to_string(r.boot_redraws) + "\n";
  }
  if (!report.methods.lambda_sweep.empty()) {
    // Sweep results follow in a second block keyed by replication and lambda.
    s += "\nreplication,lambda,kl,mse,misclass\n";
    for (const auto& r : report.records)
      for (const auto& pt : r.sweep)
        s += std::to_string(r.replication) + "," + format_double(pt.lambda) + "," + na_or(pt.kl) +
             "," + na_or(pt.mse) + "," + na_or(pt.misclass) + "\n";
  }
  write_text(path, s);
}

void write_table1_csv(const fs::path& path, const std::vector<Table1Row>& rows) {
  std::string s =
      "distribution,n,d,lambda,mcmc_beta,mcmc_u,clt_beta,clt_u,boot_beta,boot_u,"
      "mcmc_width_beta,clt_width_beta,boot_width_beta,replications\n";
  for (const auto& r : rows) {
    s += r.distribution + "," + std::to_string(r.n) + "," + std::to_string(r.d) + "," +
         format_double(r.lambda);
    for (double v : {r.mcmc.beta, r.mcmc.u, r.clt.beta, r.clt.u, r.boot.beta, r.boot.u,
                     r.mcmc.width_beta, r.clt.width_beta, r.boot.width_beta})
      s += "," + na_or(v);
    s += "," + std::to_string(r.replications) + "\n";
  }
  write_text(path, s);
}

void write_table2_csv(const fs::path& path, const std::vector<Table2Row>& rows) {
  std::string s =
      "d,tau,lambda_hat,lambda_kl,lambda_mse,kl_hat,kl_best,mse_hat,mse_best,misclass_hat,"
      "replications\n";
  for (const auto& r : rows) {
    s += std::to_string(r.d) + "," + format_double(r.tau);
    for (double v : {r.lambda_hat, r.lambda_kl, r.lambda_mse, r.kl_hat, r.kl_best, r.mse_hat,
                     r.mse_best, r.misclass_hat})
      s += "," + na_or(v);
    s += "," + std::to_string(r.replications) + "\n";
  }
  write_text(path, s);
}

void write_table3_csv(const fs::path& path, const std::vector<Table3Row>& rows) {
  std::string s = "scenario,n_o,n_u,misclass,replications\n";
  for (const auto& r : rows)
    s += r.scenario + "," + std::to_string(r.n_o) + "," + std::to_string(r.n_u) + "," +
         na_or(r.misclass) + "," + std::to_string(r.replications) + "\n";
  write_text(path, s);
}

void write_calibration_csv(const fs::path& path, const std::vector<CalibrationSeries>& series) {
  std::string s = "estimator,lower,upper,midpoint,count,positives,proportion\n";
  for (const auto& sr : series)
    for (const auto& b : sr.bins)
      s += csv_field(sr.estimator) + "," + format_double(b.lower) + "," + format_double(b.upper) +
           "," + format_double(b.midpoint()) + "," + std::to_string(b.count) + "," +
           std::to_string(b.positives) + "," + na_or(b.proportion()) + "\n";
  write_text(path, s);
}

}  // namespace bdwd::io
