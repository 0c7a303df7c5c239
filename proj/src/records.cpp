#include "enkpf/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <tuple>

#include <json.hpp>

namespace enkpf {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
std::string csv_field(const std::optional<T>& v) {
  if (!v) return {};
  if constexpr (std::is_floating_point_v<T>) {
    return std::isfinite(*v) ? format_double(*v) : std::string{};
  } else {
    return std::to_string(*v);
  }
}

// Commas and quotes never appear in algorithm names, but keep CSV valid.
std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

template <typename T>
nlohmann::json json_field(const std::optional<T>& v) {
  if (!v) return nullptr;
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(*v)) return nullptr;
  }
  return *v;
}

template <typename T>
std::optional<T> from_json_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

RecordFormat parse_record_format(std::string_view name) {
  if (name == "csv") return RecordFormat::csv;
  if (name == "jsonl") return RecordFormat::jsonl;
  throw ConfigError("unknown output format: " + std::string(name));
}

void write_records(const std::vector<ExperimentRecord>& records, std::ostream& out,
                   RecordFormat format) {
  if (format == RecordFormat::csv) {
    out << kCsvHeader << '\n';
    for (const ExperimentRecord& r : records) {
      out << csv_text(r.algorithm) << ',' << r.N << ',' << r.k << ',' << csv_field(r.l)
          << ',' << csv_field(r.gamma) << ',' << r.replicate << ',' << csv_field(r.mse_x)
          << ',' << csv_field(r.mse_dx) << ',' << csv_field(r.rel_mse_x) << ','
          << csv_field(r.rel_mse_dx) << ',' << csv_field(r.ref_mse_x) << ','
          << csv_field(r.ref_mse_dx) << ',' << csv_field(r.wall_time_s) << '\n';
    }
    return;
  }
  for (const ExperimentRecord& r : records) {
    nlohmann::ordered_json j;
    j["algorithm"] = r.algorithm;
    j["N"] = r.N;
    j["k"] = r.k;
    j["l"] = json_field(r.l);
    j["gamma"] = json_field(r.gamma);
    j["replicate"] = r.replicate;
    j["mse_x"] = json_field(r.mse_x);
    j["mse_dx"] = json_field(r.mse_dx);
    j["rel_mse_x"] = json_field(r.rel_mse_x);
    j["rel_mse_dx"] = json_field(r.rel_mse_dx);
    j["ref_mse_x"] = json_field(r.ref_mse_x);
    j["ref_mse_dx"] = json_field(r.ref_mse_dx);
    j["wall_time_s"] = json_field(r.wall_time_s);
    if (r.failed) {
      j["failed"] = true;
      j["error"] = r.error;
      j["failed_cycle"] = json_field(r.failed_cycle);
    }
    out << j.dump() << '\n';
  }
}

void write_records(const std::vector<ExperimentRecord>& records,
                   const std::string& path, RecordFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw FileError("cannot open output file", path);
  }
  write_records(records, out, format);
  out.flush();
  if (!out) {
    throw FileError("failed writing output file", path);
  }
}

std::vector<ExperimentRecord> read_records_jsonl(std::istream& in) {
  std::vector<ExperimentRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    ExperimentRecord r;
    r.algorithm = j.at("algorithm").get<std::string>();
    r.N = j.at("N").get<Index>();
    r.k = j.at("k").get<Index>();
    r.l = from_json_field<Index>(j, "l");
    r.gamma = from_json_field<double>(j, "gamma");
    r.replicate = j.at("replicate").get<Index>();
    r.mse_x = from_json_field<double>(j, "mse_x");
    r.mse_dx = from_json_field<double>(j, "mse_dx");
    r.rel_mse_x = from_json_field<double>(j, "rel_mse_x");
    r.rel_mse_dx = from_json_field<double>(j, "rel_mse_dx");
    r.ref_mse_x = from_json_field<double>(j, "ref_mse_x");
    r.ref_mse_dx = from_json_field<double>(j, "ref_mse_dx");
    r.wall_time_s = from_json_field<double>(j, "wall_time_s");
    r.failed = j.value("failed", false);
    r.error = j.value("error", std::string{});
    r.failed_cycle = from_json_field<Index>(j, "failed_cycle");
    records.push_back(std::move(r));
  }
  return records;
}

// ---------------------------------------------------------------------------

std::vector<RecordSummary> summarize(const std::vector<ExperimentRecord>& records) {
  using Key = std::tuple<std::string, Index, Index, Index>;
  struct Acc {
    RecordSummary summary;
    double sum_x = 0.0, sum_x2 = 0.0;
    double sum_dx = 0.0, sum_dx2 = 0.0;
    Index n_ok = 0, n_dx = 0;
  };
  std::map<Key, std::size_t> index;
  std::vector<Acc> accs;
  for (const ExperimentRecord& r : records) {
    const Key key{r.algorithm, r.N, r.k, r.l.value_or(-1)};
    auto [it, inserted] = index.try_emplace(key, accs.size());
    if (inserted) {
      Acc acc;
      acc.summary.algorithm = r.algorithm;
      acc.summary.N = r.N;
      acc.summary.k = r.k;
      acc.summary.l = r.l;
      accs.push_back(acc);
    }
    Acc& acc = accs[it->second];
    ++acc.summary.n_records;
    if (r.failed || !r.rel_mse_x) {
      ++acc.summary.n_failed;
      continue;
    }
    acc.sum_x += *r.rel_mse_x;
    acc.sum_x2 += *r.rel_mse_x * *r.rel_mse_x;
    ++acc.n_ok;
    if (r.rel_mse_dx) {
      acc.sum_dx += *r.rel_mse_dx;
      acc.sum_dx2 += *r.rel_mse_dx * *r.rel_mse_dx;
      ++acc.n_dx;
    }
  }
  auto mean_se = [](double sum, double sum2, Index n) {
    const double m = sum / static_cast<double>(n);
    if (n < 2) return std::pair{m, 0.0};
    const double var = std::max(0.0, (sum2 - n * m * m) / static_cast<double>(n - 1));
    return std::pair{m, std::sqrt(var / static_cast<double>(n))};
  };
  std::vector<RecordSummary> out;
  for (Acc& acc : accs) {
    RecordSummary s = acc.summary;
    if (acc.n_ok > 0) {
      std::tie(s.mean_rel_mse_x, s.se_rel_mse_x) = mean_se(acc.sum_x, acc.sum_x2, acc.n_ok);
    } else {
      s.mean_rel_mse_x = std::numeric_limits<double>::quiet_NaN();
    }
    s.mean_rel_mse_x_inclusive = s.n_failed > 0 ? std::numeric_limits<double>::infinity()
                                                : s.mean_rel_mse_x;
    if (acc.n_dx > 0) {
      const auto [m, se] = mean_se(acc.sum_dx, acc.sum_dx2, acc.n_dx);
      s.mean_rel_mse_dx = m;
      s.se_rel_mse_dx = se;
    }
    out.push_back(s);
  }
  return out;
}

void print_summary(const std::vector<RecordSummary>& summary, std::ostream& out) {
  out << std::left << std::setw(14) << "algorithm" << std::setw(6) << "N" << std::setw(6)
      << "k" << std::setw(5) << "l" << std::setw(8) << "runs" << std::setw(8) << "failed"
      << std::setw(24) << "rel_mse_x (excl, se)" << std::setw(12) << "incl"
      << "rel_mse_dx\n";
  for (const RecordSummary& s : summary) {
    char x[64];
    std::snprintf(x, sizeof(x), "%.4f (%.4f)", s.mean_rel_mse_x, s.se_rel_mse_x);
    char incl[32];
    std::snprintf(incl, sizeof(incl), "%.4f", s.mean_rel_mse_x_inclusive);
    out << std::left << std::setw(14) << s.algorithm << std::setw(6) << s.N << std::setw(6)
        << s.k << std::setw(5) << (s.l ? std::to_string(*s.l) : "-") << std::setw(8)
        << s.n_records << std::setw(8) << s.n_failed << std::setw(24) << x << std::setw(12)
        << incl;
    if (s.mean_rel_mse_dx) {
      char dx[64];
      std::snprintf(dx, sizeof(dx), "%.4f (%.4f)", *s.mean_rel_mse_dx, *s.se_rel_mse_dx);
      out << dx;
    } else {
      out << "-";
    }
    out << '\n';
  }
}

}  // namespace enkpf
