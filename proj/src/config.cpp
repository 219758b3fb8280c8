#include "slowlight/config.hpp"

#include <cmath>
#include <sstream>

#include "slowlight/error.hpp"
#include "slowlight/io.hpp"

namespace slowlight {

namespace detail {
extern const std::string_view kConfigSchema;
} // namespace detail

using nlohmann::json;

const json& config_schema() {
  static const json schema = json::parse(detail::kConfigSchema);
  return schema;
}

namespace {

std::string describe(const json& v) {
  const std::string text = v.dump();
  return text.size() > 40 ? text.substr(0, 37) + "..." : text;
}

bool has_type(const json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  if (type == "number") return v.is_number();
  if (type == "integer") {
    return v.is_number_integer() ||
           (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>());
  }
  return false;
}

const json& resolve(const json& schema, const json& root) {
  if (!schema.contains("$ref")) {
    return schema;
  }
  const std::string ref = schema["$ref"].get<std::string>();
  if (ref.rfind("#", 0) != 0) {
    throw ValidationError("schema: only local $ref is supported: " + ref);
  }
  return root.at(json::json_pointer(ref.substr(1)));
}

void check(const json& v, const json& node, const json& root, const std::string& path,
           std::vector<std::string>& errors) {
  const json& s = resolve(node, root);
  const std::string where = path.empty() ? "/" : path;
  if (s.contains("type") && !has_type(v, s["type"].get<std::string>())) {
    errors.push_back(where + ": expected " + s["type"].get<std::string>() + ", got " + describe(v));
    return;
  }
  if (s.contains("enum")) {
    bool found = false;
    for (const auto& e : s["enum"]) {
      found = found || e == v;
    }
    if (!found) {
      errors.push_back(where + ": " + describe(v) + " is not one of " + s["enum"].dump());
    }
  }
  if (v.is_number()) {
    const double x = v.get<double>();
    auto bound = [&](const char* key, bool ok, const char* relation) {
      if (s.contains(key) && !ok) {
        std::ostringstream msg;
        msg << where << ": " << describe(v) << " must be " << relation << ' ' << s[key].dump();
        errors.push_back(msg.str());
      }
    };
    bound("minimum", !s.contains("minimum") || x >= s["minimum"].get<double>(), ">=");
    bound("maximum", !s.contains("maximum") || x <= s["maximum"].get<double>(), "<=");
    bound("exclusiveMinimum",
          !s.contains("exclusiveMinimum") || x > s["exclusiveMinimum"].get<double>(), ">");
    bound("exclusiveMaximum",
          !s.contains("exclusiveMaximum") || x < s["exclusiveMaximum"].get<double>(), "<");
  }
  if (v.is_object()) {
    if (s.contains("required")) {
      for (const auto& key : s["required"]) {
        if (!v.contains(key.get<std::string>())) {
          errors.push_back(where + ": missing required key '" + key.get<std::string>() + "'");
        }
      }
    }
    const json empty = json::object();
    const json& props = s.contains("properties") ? s["properties"] : empty;
    const bool closed = s.contains("additionalProperties") && s["additionalProperties"] == false;
    for (auto it = v.begin(); it != v.end(); ++it) {
      const std::string child = path + "/" + it.key();
      if (props.contains(it.key())) {
        check(it.value(), props[it.key()], root, child, errors);
      } else if (closed) {
        errors.push_back(child + ": unknown key");
      }
    }
  }
  if (v.is_array()) {
    if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>()) {
      errors.push_back(where + ": needs at least " + s["minItems"].dump() + " items");
    }
    if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>()) {
      errors.push_back(where + ": allows at most " + s["maxItems"].dump() + " items");
    }
    if (s.contains("items")) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        check(v[i], s["items"], root, path + "/" + std::to_string(i), errors);
      }
    }
  }
}

template <class T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) {
    out = obj[key].get<T>();
  }
}

Point2 point(const json& v) { return {v[0].get<double>(), v[1].get<double>()}; }

} // namespace

std::vector<std::string> schema_errors(const json& instance, const json& schema) {
  std::vector<std::string> errors;
  check(instance, schema, schema, "", errors);
  return errors;
}

PipelineConfig parse_config(const json& j) {
  const auto errors = schema_errors(j, config_schema());
  if (!errors.empty()) {
    std::string msg = "config does not match the schema:";
    for (const auto& e : errors) {
      msg += "\n  " + e;
    }
    throw ValidationError(msg);
  }
  PipelineConfig c;
  const json empty = json::object();
  auto section = [&](const char* key) -> const json& { return j.contains(key) ? j[key] : empty; };

  const json& g = section("geometry");
  read(g, "a_nm", c.geometry.lattice_constant_nm);
  read(g, "r_nm", c.geometry.hole_radius_nm);
  read(g, "n_eff", c.geometry.n_eff);
  read(g, "supercell_rows", c.geometry.supercell_rows);

  const json& s = section("solver");
  read(s, "resolution", c.solver.resolution);
  read(s, "cutoff", c.solver.settings.cutoff);
  read(s, "n_bands", c.solver.settings.n_bands);
  read(s, "ng_cap", c.solver.settings.ng_cap);
  read(s, "identification_k", c.solver.settings.identification_k);
  read(s, "confinement_half_width", c.solver.settings.confinement_half_width);
  read(s, "k_min", c.solver.k_min);
  read(s, "n_uniform", c.solver.n_uniform);
  read(s, "n_tail", c.solver.n_tail);
  read(s, "tail_width", c.solver.tail_width);

  const json& p = section("purcell");
  read(p, "mode_height", c.purcell.options.mode_height);
  if (p.contains("reference_k")) {
    c.purcell.reference_k = p["reference_k"].get<double>();
  }
  read(p, "sigma_nm", c.purcell.sigma_nm);
  read(p, "samples", c.purcell.samples);
  if (p.contains("orientation")) {
    c.purcell.orientation = point(p["orientation"]);
  }
  if (p.contains("positions")) {
    c.purcell.positions.clear();
    for (const auto& q : p["positions"]) {
      c.purcell.positions.push_back(point(q));
    }
  }

  read(section("bulk"), "gamma_b_r", c.gamma_bulk_r);
  read(j, "calibration_offset_nm", c.calibration_offset_nm);

  const json& e = section("exciton");
  read(e, "gamma_bd", c.exciton.gamma_bd);
  c.exciton.gamma_db = c.exciton.gamma_bd; // detailed balance at the meV splitting
  read(e, "gamma_db", c.exciton.gamma_db);
  read(e, "gamma_d_nr", c.exciton.gamma_d_nr);
  if (e.contains("initial_populations")) {
    for (int i = 0; i < 4; ++i) {
      c.exciton.initial_populations[i] = e["initial_populations"][i].get<double>();
    }
  }

  if (j.contains("groups")) {
    for (const auto& gj : j["groups"]) {
      GroupConfig group;
      group.label = gj["label"].get<std::string>();
      group.position = point(gj["position"]);
      for (const auto& qj : gj["qds"]) {
        group.qds.push_back({qj["gamma_nr"].get<double>(),
                             qj["detunings_nm"].get<std::vector<double>>()});
      }
      c.groups.push_back(std::move(group));
    }
  }

  const json& sim = section("simulation");
  read(sim, "seed", c.simulation.seed);
  read(sim, "total_counts", c.simulation.total_counts);
  read(sim, "n_bins", c.simulation.n_bins);
  read(sim, "bin_width_ns", c.simulation.bin_width_ns);
  read(sim, "irf_fwhm_ns", c.simulation.irf_fwhm_ns);
  read(sim, "background_fraction", c.simulation.background_fraction);
  read(sim, "t0_ns", c.simulation.t0_ns);

  const json& f = section("fit");
  if (f.contains("t_start_ns")) {
    c.fit.t_start_ns = f["t_start_ns"].get<double>();
  }
  read(f, "tolerance", c.fit.options.tolerance);
  read(f, "max_iterations", c.fit.options.max_iterations);
  if (f.contains("parameterization") && f["parameterization"] == "lifetime") {
    c.fit.options.parameterization = RateParameterization::Lifetime;
  }

  const json& d = section("design");
  read(d, "target_nm", c.design.target_wavelength_nm);
  read(d, "max_detuning_nm", c.design.max_detuning_nm);
  if (d.contains("a_range_nm")) {
    c.design.a_min_nm = d["a_range_nm"][0].get<double>();
    c.design.a_max_nm = d["a_range_nm"][1].get<double>();
  }
  if (d.contains("r_range_nm")) {
    c.design.r_min_nm = d["r_range_nm"][0].get<double>();
    c.design.r_max_nm = d["r_range_nm"][1].get<double>();
  }
  read(d, "grid_step_nm", c.design.grid_step_nm);
  c.design.n_eff = c.geometry.n_eff;
  c.design.supercell_rows = c.geometry.supercell_rows;

  read(j, "output_dir", c.output_dir);

  c.geometry.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(io::read_json(path));
}

} // namespace slowlight
