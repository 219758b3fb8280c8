#include "slowlight/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "slowlight/error.hpp"

namespace slowlight::io {

namespace fs = std::filesystem;

std::string format_number(double value) {
  if (std::isnan(value)) {
    return "nan";
  }
  if (std::isinf(value)) {
    return value > 0 ? "inf" : "-inf";
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw ValidationError("cannot open " + tmp.string() + " for writing");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      throw ValidationError("failed writing " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

namespace {

void write_json(std::ostringstream& out, const nlohmann::json& v, int indent) {
  const std::string pad(indent, ' ');
  const std::string inner(indent + 2, ' ');
  switch (v.type()) {
  case nlohmann::json::value_t::object: {
    if (v.empty()) {
      out << "{}";
      return;
    }
    out << "{\n";
    bool first = true;
    for (auto it = v.begin(); it != v.end(); ++it) {
      out << (first ? "" : ",\n") << inner << nlohmann::json(it.key()).dump() << ": ";
      write_json(out, it.value(), indent + 2);
      first = false;
    }
    out << '\n' << pad << '}';
    return;
  }
  case nlohmann::json::value_t::array: {
    if (v.empty()) {
      out << "[]";
      return;
    }
    bool scalars = true;
    for (const auto& e : v) {
      scalars = scalars && !e.is_structured();
    }
    if (scalars) {
      out << '[';
      for (std::size_t i = 0; i < v.size(); ++i) {
        out << (i ? ", " : "");
        write_json(out, v[i], indent);
      }
      out << ']';
      return;
    }
    out << "[\n";
    for (std::size_t i = 0; i < v.size(); ++i) {
      out << (i ? ",\n" : "") << inner;
      write_json(out, v[i], indent + 2);
    }
    out << '\n' << pad << ']';
    return;
  }
  case nlohmann::json::value_t::number_float: {
    const double d = v.get<double>();
    out << (std::isfinite(d) ? format_number(d) : "null");
    return;
  }
  default:
    out << v.dump();
  }
}

} // namespace

std::string to_json_text(const nlohmann::json& value) {
  std::ostringstream out;
  write_json(out, value, 0);
  out << '\n';
  return out.str();
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) {
      return i;
    }
  }
  throw ValidationError("CSV has no column '" + name + "'");
}

bool CsvTable::has_column(const std::string& name) const {
  for (const auto& h : header) {
    if (h == name) {
      return true;
    }
  }
  return false;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : width_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    text_ += (i ? "," : "") + header[i];
  }
  text_ += '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != width_) {
    throw ValidationError("CSV row width does not match the header");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    text_ += (i ? "," : "") + format_number(values[i]);
  }
  text_ += '\n';
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("input file not found: " + path.string());
  }
  CsvTable table;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> fields;
    std::stringstream ss(s);
    std::string f;
    while (std::getline(ss, f, ',')) {
      while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) {
        f.pop_back();
      }
      while (!f.empty() && f.front() == ' ') {
        f.erase(f.begin());
      }
      fields.push_back(f);
    }
    return fields;
  };
  if (!std::getline(in, line)) {
    throw ValidationError("CSV file is empty: " + path.string());
  }
  table.header = split(line);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") {
      continue;
    }
    const auto fields = split(line);
    if (fields.size() != table.header.size()) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected " + std::to_string(table.header.size()) + " fields");
    }
    std::vector<double> row;
    for (const auto& f : fields) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(f, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != f.size() || f.empty()) {
        throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": '" + f +
                              "' is not a number");
      }
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("input file not found: " + path.string());
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": invalid JSON: " + e.what());
  }
}

fs::path metadata_path(const fs::path& csv_path) {
  fs::path p = csv_path;
  p.replace_extension(".json");
  return p;
}

void write_histogram(const fs::path& csv_path, const DecayHistogram& hist) {
  CsvWriter csv({"t_start_ns", "count"});
  for (int i = 0; i < hist.n_bins(); ++i) {
    csv.row({hist.bin_edges[i], static_cast<double>(hist.counts[i])});
  }
  write_file_atomic(csv_path, csv.text());
  nlohmann::json meta = {
      {"n_bins", hist.n_bins()},
      {"bin_width_ns", hist.bin_width()},
      {"total_counts", hist.total_counts},
      {"observed_counts", hist.observed_total()},
      {"irf_fwhm_ns", hist.irf_fwhm_ns},
      {"background_per_bin", hist.background_per_bin},
      {"t0_ns", hist.t0_ns},
      {"seed", hist.seed},
      {"truncated", hist.truncated},
  };
  write_file_atomic(metadata_path(csv_path), to_json_text(meta));
}

HistogramData read_histogram(const fs::path& csv_path) {
  const CsvTable table = read_csv(csv_path);
  const auto ct = table.column("t_start_ns");
  const auto cc = table.column("count");
  if (table.rows.size() < 2) {
    throw ValidationError(csv_path.string() + ": histogram needs at least 2 bins");
  }
  HistogramData data;
  for (const auto& row : table.rows) {
    if (row[cc] < 0.0) {
      throw ValidationError(csv_path.string() + ": counts must be >= 0");
    }
    data.edges.push_back(row[ct]);
    data.counts.push_back(row[cc]);
  }
  const double width = data.edges[1] - data.edges[0];
  if (!(width > 0.0)) {
    throw ValidationError(csv_path.string() + ": bin starts must increase");
  }
  for (std::size_t i = 1; i < data.edges.size(); ++i) {
    if (std::abs(data.edges[i] - data.edges[i - 1] - width) > 1e-6 * width) {
      throw ValidationError(csv_path.string() + ": bin width must be uniform");
    }
  }
  data.edges.push_back(data.edges.back() + width);
  return data;
}

nlohmann::json to_json(const FitResult& fit) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& p : fit.parameters) {
    params[p.name] = {{"value", p.value}, {"error", p.error}, {"at_bound", p.at_bound}};
  }
  nlohmann::json cov = nlohmann::json::array();
  for (Eigen::Index i = 0; i < fit.covariance.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < fit.covariance.cols(); ++j) {
      row.push_back(fit.covariance(i, j));
    }
    cov.push_back(row);
  }
  return {
      {"model", fit.model},
      {"parameters", params},
      {"covariance", cov},
      {"objective", fit.objective},
      {"converged", fit.converged},
      {"iterations", fit.iterations},
      {"gradient_norm", fit.gradient_norm},
      {"collapsed", fit.collapsed},
  };
}

nlohmann::json to_json(const LinearFit& fit, std::span<const TuningPoint> points) {
  nlohmann::json out = to_json(fit.fit);
  out["coupling_A"] = fit.coupling;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    rows.push_back({{"qd", points[i].qd},
                    {"delta_lambda_nm", points[i].delta_lambda_nm},
                    {"n_g", points[i].n_g},
                    {"gamma", points[i].gamma},
                    {"sigma", points[i].sigma},
                    {"fitted_gamma", fit.fitted_gamma[i]},
                    {"quantum_efficiency", fit.quantum_efficiency[i]}});
  }
  out["points"] = rows;
  return out;
}

} // namespace slowlight::io
