#include "octsim/pipeline.hpp"

#include "octsim/config.hpp"
#include "octsim/numeric.hpp"

#include <algorithm>
#include <cmath>

namespace octsim {

using nlohmann::json;

namespace {

json provenance_for(const json& config, const std::string& stage, const Dataset* input) {
  json p{{"tool_version", kToolVersion}, {"stage", stage}, {"config_hash", config_hash(config)}, {"params", config}};
  if (input) p["input"] = {{"kind", input->kind}, {"config_hash", input->provenance.value("config_hash", "")}};
  return p;
}

std::string phantom_kind_name(const Phantom& p) {
  if (std::holds_alternative<NonDispersiveScalar>(p)) return "nondispersive";
  if (std::holds_alternative<DispersiveScalar>(p)) return "dispersive";
  if (std::holds_alternative<Layered>(p)) return "layered";
  return "anisotropic";
}

Units effective_units(const json& config, const Units& from_data) {
  if (config.contains("units")) return parse_units(config);
  return from_data;
}

Dataset simulate_measurements(const Phantom& phantom, const json& config, const Units& units, unsigned threads) {
  json cfg = config;
  cfg["units"] = units_to_json(units);
  const Geometry geo = parse_geometry(cfg);
  const Pulse pulse = parse_pulse(cfg, geo);
  const MeasurementSet ms = synthesize_measurements(phantom, pulse, geo, threads);
  Dataset ds = measurements_to_dataset(ms);
  ds.attributes["phantom_kind"] = phantom_kind_name(phantom);
  return ds;
}

Dataset simulate_traces(const Phantom& phantom, const json& config, const Units& units, unsigned threads) {
  json cfg = config;
  cfg["units"] = units_to_json(units);
  const SimulateOptions opt = parse_simulate(cfg);
  if (opt.trace_grid.count == 0) throw ConfigurationError("config.simulate.trace: missing or empty trace grid");

  if (const auto* lay = std::get_if<Layered>(&phantom)) {
    double omega0 = 0.0;
    std::optional<Pulse> pulse;
    if (cfg.contains("pulse")) {
      const Geometry geo = parse_geometry(cfg);
      geo.validate_phantom(phantom);
      pulse = parse_pulse(cfg, geo);
      omega0 = pulse->center_frequency();
    }
    const bool att = opt.layered_attenuation && omega0 > 0.0;
    TraceSet t{{kE3}, opt.trace_grid, units, {layered_forward_trace(*lay, opt.trace_grid, att, omega0, units)}};
    Dataset ds = traces_to_dataset(t);
    ds.attributes["phantom_kind"] = "layered";
    ds.attributes["T"] = lay->bins.T;
    ds.attributes["omega0"] = omega0;
    ds.attributes["fresnel_attenuation"] = att;
    ds.attributes["model_limitations"] = "single scattering; multiple reflections between interfaces are not modelled";
    if (pulse) add_pulse(ds, *pulse);
    return ds;
  }

  const auto* disp = std::get_if<DispersiveScalar>(&phantom);
  if (!disp) throw ModeMismatchError("traces can only be simulated for dispersive or layered phantoms");
  const Geometry geo = parse_geometry(cfg);
  geo.validate_phantom(phantom);
  TraceSet t{geo.directions, opt.trace_grid, units, std::vector<std::vector<double>>(geo.directions.size())};
  // Both trace models, so the plane-sampling error is reported per phantom.
  std::vector<double> model_gap(geo.directions.size(), 0.0);
  std::vector<double> model_scale(geo.directions.size(), 0.0);
  parallel_for(geo.directions.size(), threads, [&](std::size_t i) {
    const auto cont = trace_from_phantom(*disp, geo.directions[i], opt.trace_grid, TraceModel::Continuous, units);
    const auto disc = trace_from_phantom(*disp, geo.directions[i], opt.trace_grid, TraceModel::Discrete, units);
    for (std::size_t k = 0; k < cont.size(); ++k) {
      model_gap[i] = std::max(model_gap[i], std::abs(cont[k] - disc[k]));
      model_scale[i] = std::max(model_scale[i], std::abs(cont[k]));
    }
    t.values[i] = opt.trace_model == TraceModel::Continuous ? cont : disc;
  });
  double gap = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < model_gap.size(); ++i) {
    gap = std::max(gap, model_gap[i]);
    scale = std::max(scale, model_scale[i]);
  }
  long n_max = std::numeric_limits<long>::min();
  for (const auto& th : geo.directions) n_max = std::max(n_max, plane_index_range(*disp, th, units).second);
  Dataset ds = traces_to_dataset(t);
  ds.attributes["phantom_kind"] = "dispersive";
  ds.attributes["T"] = disp->bins.T;
  ds.attributes["n_max"] = n_max;
  ds.attributes["trace_model"] = opt.trace_model == TraceModel::Continuous ? "continuous" : "discrete";
  // max |continuous - discrete| / max |continuous| over all traces
  ds.attributes["plane_sampling_error"] = scale > 0.0 ? gap / scale : 0.0;
  return ds;
}

Dataset simulate_rotated(const Phantom& phantom, const json& config, const Units& units, unsigned threads) {
  const auto* an = std::get_if<AnisotropicMatrix>(&phantom);
  if (!an) throw ModeMismatchError("rotated data need an anisotropic phantom");
  json cfg = config;
  cfg["units"] = units_to_json(units);
  const SimulateOptions opt = parse_simulate(cfg);
  if (opt.rotations.size() < 3) throw ConfigurationError("config.simulate.rotations: at least three rotations required");
  if (opt.sigmas.empty()) throw ConfigurationError("config.simulate.sigmas: at least one plane offset required");
  const Geometry geo = parse_geometry(cfg);
  RotatedDataSet r;
  r.units = units;
  r.thetas = geo.directions;
  r.rotations = opt.rotations;
  r.sigmas = opt.sigmas;
  r.slices = an->slices.size();
  r.values.assign(r.thetas.size() * r.rotations.size() * r.sigmas.size() * r.slices * 6, 0.0);
  for (std::size_t th = 0; th < r.thetas.size(); ++th)
    for (std::size_t k = 0; k < r.rotations.size(); ++k)
      if (!rotated_direction(r.rotations[k], r.thetas[th]))
        throw GeometryError("config.simulate.rotations[" + std::to_string(k) + "]: no rotated detector direction");
  const Pol pols[3] = {Pol::E1, Pol::E2, Pol::E1E2};
  parallel_for(r.thetas.size(), threads, [&](std::size_t th) {
    for (std::size_t k = 0; k < r.rotations.size(); ++k)
      for (std::size_t s = 0; s < r.sigmas.size(); ++s)
        for (std::size_t sl = 0; sl < r.slices; ++sl)
          for (std::size_t p = 0; p < 3; ++p)
            for (int j = 1; j <= 2; ++j)
              r.at(th, k, s, sl, p, static_cast<std::size_t>(j - 1)) =
                  *rotated_measurement_data(*an, r.rotations[k], r.thetas[th], r.sigmas[s], sl, pols[p], j, units);
  });
  Dataset ds = rotated_to_dataset(r);
  ds.attributes["phantom_kind"] = "anisotropic";
  return ds;
}

PipelineResult reconstruct_cone(const Dataset& data, const ReconstructOptions& opt, bool axial) {
  const MeasurementSet ms = dataset_to_measurements(data);
  const ScatteredSpectrum spec = recover_scattered_spectrum(ms, opt.eps_f);
  const ChiTildeSamples samples = extract_chi_tilde_isotropic(spec, ms.geometry);
  PipelineResult res;
  Dataset& ds = res.dataset;
  ds.kind = "reconstruction";
  std::size_t masked = 0;
  for (auto m : spec.mask) masked += m ? 0 : 1;
  json report{{"eps_f", opt.eps_f}, {"masked_frequencies", masked}, {"usable_samples", samples.usable_count()}};
  std::vector<double> mask(samples.mask.begin(), samples.mask.end());
  ds.add(complex_array("chi_tilde", {samples.n_omega(), samples.n_theta()}, samples.values));
  ds.add(real_array("mask", {samples.n_omega(), samples.n_theta()}, std::move(mask)));
  ds.add(real_array("omegas", {samples.n_omega()}, samples.omegas));

  if (axial) {
    const AxialReconstruction ax = axial_inversion(samples, opt.axial);
    ds.attributes["mode"] = "axial";
    report["taper_fraction"] = ax.taper_fraction;
    report["window"] = "raised-cosine";
    report["resolution"] = ax.resolution;
    report["samples_used"] = ax.samples_used;
    ds.add(real_array("z", {ax.z.size()}, ax.z));
    ds.add(real_array("chi", {ax.values.size()}, ax.values));
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < ax.z.size(); ++i) rows.push_back({ax.z[i], ax.values[i]});
    res.csv.push_back({"profile.csv", csv_table({"z", "chi"}, rows)});
  } else {
    if (!opt.cone_grid) throw ConfigurationError("config.reconstruct.cone_grid: required for cone mode");
    const ConeReconstruction rec = cone_inversion(samples, *opt.cone_grid);
    ds.attributes["mode"] = "cone";
    report["imag_residual"] = rec.imag_residual;
    report["coverage"] = {{"samples_used", rec.coverage.samples_used},
                          {"samples_dropped", rec.coverage.samples_dropped},
                          {"nodes_filled", rec.coverage.nodes_filled},
                          {"nodes_total", rec.coverage.nodes_total}};
    std::size_t in_cone = 0;
    for (std::size_t w = 0; w < samples.n_omega(); ++w)
      for (std::size_t th = 0; th < samples.n_theta(); ++th)
        if (samples.usable(w, th) && cone_coverage(samples.thetas[th], samples.omegas[w], samples.units).in_cone)
          ++in_cone;
    report["coverage"]["samples_in_cone"] = in_cone;
    const auto& g = rec.field.grid;
    ds.attributes["grid"] = {{"origin", {g.origin.x(), g.origin.y(), g.origin.z()}},
                             {"spacing", {g.spacing.x(), g.spacing.y(), g.spacing.z()}},
                             {"dims", {g.dims[0], g.dims[1], g.dims[2]}}};
    ds.add(real_array("chi", {g.dims[0], g.dims[1], g.dims[2]}, rec.field.values));
    std::vector<std::vector<double>> rows;
    const std::size_t j = g.dims[1] / 2;
    for (std::size_t i = 0; i < g.dims[0]; ++i)
      for (std::size_t k = 0; k < g.dims[2]; ++k) {
        const std::size_t flat = g.index(i, j, k);
        const Vec3 x = g.center(flat);
        rows.push_back({x.x(), x.z(), rec.field.values[flat]});
      }
    res.csv.push_back({"slice_x1x3.csv", csv_table({"x1", "x3", "chi"}, rows)});
  }
  ds.attributes["report"] = report;
  return res;
}

PipelineResult reconstruct_dispersive(const Dataset& data, const ReconstructOptions& opt) {
  const TraceSet traces = dataset_to_traces(data);
  const double T = opt.T ? *opt.T : data.attributes.value("T", 0.0);
  if (!(T > 0.0)) throw ConfigurationError("config.reconstruct.dispersive.T: required (dataset carries none)");
  long n_max = 0;
  if (opt.n_max)
    n_max = *opt.n_max;
  else if (data.attributes.contains("n_max"))
    n_max = data.attributes.at("n_max").get<long>();
  else
    throw ConfigurationError("config.reconstruct.dispersive.n_max: required (dataset carries none)");
  const RadonBins rb = dispersive_recursion(traces, T, n_max, opt.n_min, opt.bins_per_T);
  PipelineResult res;
  res.dataset = radon_bins_to_dataset(rb);
  res.dataset.attributes["mode"] = "dispersive";
  res.dataset.attributes["report"] = {{"derivative", "central differences, one-sided second order at cell ends"}};
  std::vector<std::vector<double>> rows;
  for (std::size_t th = 0; th < rb.thetas.size(); ++th)
    for (long n = rb.n_min; n <= rb.n_max; ++n)
      for (std::size_t m = 0; m < rb.bins_per_T; ++m)
        rows.push_back({static_cast<double>(th), static_cast<double>(n), rb.tau(m), rb.at(th, n, m)});
  res.csv.push_back({"radon_bins.csv", csv_table({"theta_index", "n", "tau", "value"}, rows)});
  return res;
}

PipelineResult reconstruct_layered(const Dataset& data, const ReconstructOptions& opt) {
  const TraceSet traces = dataset_to_traces(data);
  const double T = opt.T ? *opt.T : data.attributes.value("T", 0.0);
  if (!(T > 0.0)) throw ConfigurationError("config.reconstruct.dispersive.T: required (dataset carries none)");
  LayeredOptions lo = opt.layered;
  if (lo.omega0 <= 0.0) lo.omega0 = data.attributes.value("omega0", 0.0);
  Pulse pulse;
  if (data.has("pulse")) pulse = read_pulse(data);
  if (lo.omega0 <= 0.0 && !data.has("pulse")) lo.incident_update = false;
  const LayerStack st = layered_reconstruct(traces, pulse, T, lo);

  PipelineResult res;
  Dataset& ds = res.dataset;
  ds.kind = "layer_stack";
  ds.attributes["mode"] = "layered";
  ds.attributes["report"] = {{"threshold", lo.threshold},
                             {"window", lo.window},
                             {"floor", lo.floor},
                             {"incident_update", lo.incident_update},
                             {"omega0", lo.omega0},
                             {"model_limitations", "multiple reflections are not included"}};
  const std::size_t layers = st.profiles.size();
  const std::size_t M = lo.bins_per_T;
  std::vector<double> prof;
  for (const auto& p : st.profiles) prof.insert(prof.end(), p.begin(), p.end());
  ds.add(real_array("boundaries", {st.boundaries.size()}, st.boundaries));
  ds.add(real_array("profiles", {layers, M}, std::move(prof)));
  ds.add(real_array("static_chi", {layers}, st.static_chi));
  ds.add(real_array("attenuation", {layers}, st.attenuation));
  ds.add(real_array("residuals", {layers}, st.residuals));
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < layers; ++k)
    rows.push_back({static_cast<double>(k + 1), st.boundaries[k], st.boundaries[k + 1], st.static_chi[k],
                    st.attenuation[k], st.residuals[k]});
  res.csv.push_back({"layers.csv", csv_table({"layer", "top", "bottom", "static_chi", "attenuation", "residual"}, rows)});
  std::vector<std::vector<double>> prow;
  for (std::size_t k = 0; k < layers; ++k)
    for (std::size_t m = 0; m < M; ++m)
      prow.push_back({static_cast<double>(k + 1), T * (static_cast<double>(m) + 0.5) / static_cast<double>(M),
                      st.profiles[k][m]});
  res.csv.push_back({"profiles.csv", csv_table({"layer", "tau", "chi"}, prow)});
  return res;
}

PipelineResult reconstruct_aniso(const Dataset& data) {
  const RotatedDataSet r = dataset_to_rotated(data);
  if (r.rotations.size() < 3) throw ModeMismatchError("anisotropic mode needs data for three rotations");
  const std::vector<Mat3> rots(r.rotations.begin(), r.rotations.begin() + 3);
  const Pol pols[3] = {Pol::E1, Pol::E2, Pol::E1E2};
  std::vector<double> X;
  std::vector<double> residual;
  for (std::size_t th = 0; th < r.thetas.size(); ++th)
    for (std::size_t s = 0; s < r.sigmas.size(); ++s)
      for (std::size_t sl = 0; sl < r.slices; ++sl) {
        std::vector<Mat2> blocks;
        for (std::size_t k = 0; k < 3; ++k) {
          PolarizationData a;
          for (std::size_t p = 0; p < 3; ++p)
            for (int j = 1; j <= 2; ++j) a[{pols[p], j}] = r.at(th, k, s, sl, p, static_cast<std::size_t>(j - 1));
          blocks.push_back(anisotropic_B(a));
        }
        const AnisotropicSolution sol = anisotropic_solve(r.thetas[th], rots, blocks);
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) X.push_back(sol.X(i, j));
        residual.push_back(sol.residual);
      }
  PipelineResult res;
  Dataset& ds = res.dataset;
  ds.kind = "reconstruction";
  ds.attributes["mode"] = "aniso";
  ds.attributes["thetas"] = data.attributes.at("thetas");
  ds.attributes["sigmas"] = r.sigmas;
  ds.add(real_array("X", {r.thetas.size(), r.sigmas.size(), r.slices, 3, 3}, X));
  ds.add(real_array("residual", {r.thetas.size(), r.sigmas.size(), r.slices}, residual));
  std::vector<std::vector<double>> rows;
  std::size_t idx = 0;
  for (std::size_t th = 0; th < r.thetas.size(); ++th)
    for (std::size_t s = 0; s < r.sigmas.size(); ++s)
      for (std::size_t sl = 0; sl < r.slices; ++sl) {
        std::vector<double> row{static_cast<double>(th), r.sigmas[s], static_cast<double>(sl)};
        for (int e = 0; e < 9; ++e) row.push_back(X[idx * 9 + static_cast<std::size_t>(e)]);
        row.push_back(residual[idx]);
        rows.push_back(row);
        ++idx;
      }
  res.csv.push_back({"matrices.csv",
                     csv_table({"theta_index", "sigma", "slice", "x11", "x12", "x13", "x21", "x22", "x23", "x31", "x32",
                                "x33", "residual"},
                               rows)});
  return res;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigurationError*>(&e) || dynamic_cast<const GeometryError*>(&e) ||
      dynamic_cast<const InvalidArgument*>(&e))
    return kExitConfig;
  if (dynamic_cast<const ModeMismatchError*>(&e) || dynamic_cast<const RangeError*>(&e) ||
      dynamic_cast<const DegenerateDataError*>(&e) || dynamic_cast<const nlohmann::json::exception*>(&e))
    return kExitMismatch;
  return kExitNumerical;
}

Dataset make_phantom_dataset(const json& config) {
  const Phantom phantom = parse_phantom(config);
  Dataset ds = phantom_to_dataset(phantom, parse_units(config));
  ds.provenance = provenance_for(config, "phantom", nullptr);
  return ds;
}

Dataset simulate_dataset(const Dataset& phantom_ds, const json& config, unsigned threads) {
  Units data_units;
  const Phantom phantom = dataset_to_phantom(phantom_ds, &data_units);
  const Units units = effective_units(config, data_units);
  validate_phantom(phantom, units);
  std::string product = parse_simulate(config).product;
  if (product.empty()) {
    if (std::holds_alternative<NonDispersiveScalar>(phantom))
      product = "measurements";
    else if (std::holds_alternative<AnisotropicMatrix>(phantom))
      product = "rotated";
    else
      product = "traces";
  }
  Dataset ds;
  if (product == "measurements")
    ds = simulate_measurements(phantom, config, units, threads);
  else if (product == "traces")
    ds = simulate_traces(phantom, config, units, threads);
  else
    ds = simulate_rotated(phantom, config, units, threads);
  ds.provenance = provenance_for(config, "simulate", &phantom_ds);
  return ds;
}

PipelineResult reconstruct_dataset(const Dataset& data, const std::string& mode, const json& config) {
  const ReconstructOptions opt = parse_reconstruct(config);
  PipelineResult res;
  if (mode == "cone" || mode == "axial") {
    if (data.kind != "measurements")
      throw ModeMismatchError(mode + " mode needs a measurements dataset, got '" + data.kind + "'");
    res = reconstruct_cone(data, opt, mode == "axial");
  } else if (mode == "dispersive") {
    if (data.kind != "traces") throw ModeMismatchError("dispersive mode needs a traces dataset, got '" + data.kind + "'");
    res = reconstruct_dispersive(data, opt);
  } else if (mode == "layered") {
    if (data.kind != "traces") throw ModeMismatchError("layered mode needs a traces dataset, got '" + data.kind + "'");
    res = reconstruct_layered(data, opt);
  } else if (mode == "aniso") {
    if (data.kind != "rotated_data")
      throw ModeMismatchError("aniso mode needs a rotated_data dataset with rotation metadata, got '" + data.kind + "'");
    res = reconstruct_aniso(data);
  } else {
    throw ConfigurationError("--mode: unknown mode '" + mode + "' (expected cone, axial, dispersive, layered, aniso)");
  }
  res.dataset.provenance = provenance_for(config, "reconstruct", &data);
  res.dataset.provenance["mode"] = mode;
  return res;
}

void write_result(const std::filesystem::path& out, const PipelineResult& result) {
  write_dataset(out, result.dataset);
  for (const auto& c : result.csv) write_text_file(out / c.file, c.text);
}

}  // namespace octsim
