#include "pihnn/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace pihnn {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError("config " + (where.empty() ? std::string("/") : where) + ": " + what);
}

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) fail(where, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& item : j.items()) {
    if (!allowed.contains(item.key())) fail(where, "unknown field '" + item.key() + "'");
  }
}

const json& need(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) fail(where, std::string("missing required field '") + key + "'");
  return j.at(key);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where, "expected an integer");
  return j.get<int>();
}

std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

double number_or(const json& j, const std::string& where, const char* key, double fallback) {
  return j.contains(key) ? number(j.at(key), where + "/" + key) : fallback;
}

int integer_or(const json& j, const std::string& where, const char* key, int fallback) {
  return j.contains(key) ? integer(j.at(key), where + "/" + key) : fallback;
}

C64 point(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) fail(where, "expected [x, y]");
  return {number(j[0], where + "/0"), number(j[1], where + "/1")};
}

Vec2 vec(const json& j, const std::string& where) {
  const C64 z = point(j, where);
  return {z.real(), z.imag()};
}

template <typename Fn>
auto wrap(const std::string& where, Fn fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const ContractError& e) {
    fail(where, e.what());
  }
}

BoundaryCondition parse_bc(const json& j, const std::string& where, const std::vector<int>& subdomains) {
  allow_keys(j, where, {"kind", "profile", "value", "magnitude"});
  const std::string kind = text(need(j, where, "kind"), where + "/kind");
  if (kind == "symmetry") return BoundaryCondition::symmetry();
  if (kind == "interface") {
    if (subdomains.size() != 2) fail(where, "interface pieces need two subdomain ids");
    return BoundaryCondition::interface(subdomains[0], subdomains[1]);
  }
  if (kind != "traction" && kind != "displacement") {
    fail(where + "/kind", "unknown condition '" + kind + "' (expected traction, displacement, symmetry or interface)");
  }
  BoundaryValue v;
  const std::string profile = j.contains("profile") ? text(j.at("profile"), where + "/profile") : "constant";
  if (profile == "constant") {
    v.profile = BoundaryProfile::Constant;
    v.vector = j.contains("value") ? vec(j.at("value"), where + "/value") : Vec2{};
  } else if (profile == "pressure" || profile == "shear") {
    if (kind != "traction") fail(where + "/profile", "'" + profile + "' applies to traction conditions only");
    v.profile = profile == "pressure" ? BoundaryProfile::Pressure : BoundaryProfile::Shear;
    v.magnitude = number(need(j, where, "magnitude"), where + "/magnitude");
  } else {
    fail(where + "/profile", "unknown profile '" + profile + "' (expected constant, pressure or shear)");
  }
  return kind == "traction" ? BoundaryCondition::traction(v) : BoundaryCondition::displacement(v);
}

double angle(const json& j, const std::string& where, const char* rad_key, const char* deg_key) {
  if (j.contains(rad_key)) return number(j.at(rad_key), where + "/" + rad_key);
  if (j.contains(deg_key)) return number(j.at(deg_key), where + "/" + deg_key) * std::numbers::pi / 180.0;
  fail(where, std::string("missing '") + rad_key + "' or '" + deg_key + "'");
}

BoundaryPiece parse_piece(const json& j, const std::string& where) {
  allow_keys(j, where,
             {"name", "shape", "p0", "p1", "center", "radius", "theta0", "theta1", "theta0_deg", "theta1_deg",
              "normal", "subdomains", "bc"});
  BoundaryPiece p;
  p.name = j.contains("name") ? text(j.at("name"), where + "/name") : where;
  const std::string shape = text(need(j, where, "shape"), where + "/shape");
  if (shape == "line") {
    p.shape = LineShape{point(need(j, where, "p0"), where + "/p0"), point(need(j, where, "p1"), where + "/p1")};
  } else if (shape == "arc") {
    p.shape = ArcShape{point(need(j, where, "center"), where + "/center"),
                       number(need(j, where, "radius"), where + "/radius"),
                       angle(j, where, "theta0", "theta0_deg"), angle(j, where, "theta1", "theta1_deg")};
  } else {
    fail(where + "/shape", "unknown shape '" + shape + "' (expected line or arc)");
  }
  const std::string normal = text(need(j, where, "normal"), where + "/normal");
  if (normal == "left") {
    p.normal_side = NormalSide::Left;
  } else if (normal == "right") {
    p.normal_side = NormalSide::Right;
  } else {
    fail(where + "/normal", "expected left or right");
  }
  if (j.contains("subdomains")) {
    const json& ids = j.at("subdomains");
    if (!ids.is_array() || ids.empty()) fail(where + "/subdomains", "expected a non-empty array of ids");
    p.subdomains.clear();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      p.subdomains.push_back(integer(ids[k], where + "/subdomains/" + std::to_string(k)));
    }
  }
  p.bc = parse_bc(need(j, where, "bc"), where + "/bc", p.subdomains);
  return p;
}

json point_json(C64 z) { return json::array({z.real(), z.imag()}); }

json bc_json(const BoundaryCondition& bc) {
  json j;
  j["kind"] = std::string(to_string(bc.kind));
  if (bc.kind == BCKind::Symmetry || bc.kind == BCKind::Interface) return j;
  switch (bc.value.profile) {
    case BoundaryProfile::Constant:
      j["profile"] = "constant";
      j["value"] = json::array({bc.value.vector.x, bc.value.vector.y});
      break;
    case BoundaryProfile::Pressure:
      j["profile"] = "pressure";
      j["magnitude"] = bc.value.magnitude;
      break;
    case BoundaryProfile::Shear:
      j["profile"] = "shear";
      j["magnitude"] = bc.value.magnitude;
      break;
  }
  return j;
}

}  // namespace

ProblemSpec problem_from_json(const json& j) {
  if (!j.is_object()) fail("", "expected an object at the top level");
  allow_keys(j, "", {"name", "material", "geometry", "networks", "training", "outputs", "reference"});
  for (const char* block : {"material", "geometry", "networks"}) {
    if (!j.contains(block)) throw ConfigError(std::string("config: missing required block '") + block + "'");
  }
  ProblemSpec spec;
  spec.name = j.contains("name") ? text(j.at("name"), "/name") : "problem";

  const json& m = j.at("material");
  allow_keys(m, "/material", {"lambda", "mu", "mode"});
  const std::string mode = m.contains("mode") ? text(m.at("mode"), "/material/mode") : "plane_strain";
  PlaneMode pm = PlaneMode::PlaneStrain;
  if (mode == "plane_stress") {
    pm = PlaneMode::PlaneStress;
  } else if (mode != "plane_strain") {
    fail("/material/mode", "expected plane_strain or plane_stress");
  }
  const double lambda = number(need(m, "/material", "lambda"), "/material/lambda");
  const double mu = number(need(m, "/material", "mu"), "/material/mu");
  spec.material = wrap("/material", [&] { return Material::make(lambda, mu, pm); });

  const json& g = j.at("geometry");
  allow_keys(g, "/geometry", {"subdomains", "pieces"});
  spec.domain.n_subdomains = integer_or(g, "/geometry", "subdomains", 1);
  const json& pieces = need(g, "/geometry", "pieces");
  if (!pieces.is_array() || pieces.empty()) fail("/geometry/pieces", "expected a non-empty array");
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    const std::string where = "/geometry/pieces/" + std::to_string(k);
    BoundaryPiece p = parse_piece(pieces[k], where);
    wrap(where, [&] {
      validate_piece(p, spec.domain.n_subdomains);
      return 0;
    });
    spec.domain.pieces.push_back(std::move(p));
  }

  const json& n = j.at("networks");
  allow_keys(n, "/networks", {"hidden", "activation", "mode"});
  const json& hidden = need(n, "/networks", "hidden");
  if (!hidden.is_array() || hidden.empty()) fail("/networks/hidden", "expected a non-empty array of widths");
  spec.network.hidden.clear();
  for (std::size_t k = 0; k < hidden.size(); ++k) {
    spec.network.hidden.push_back(integer(hidden[k], "/networks/hidden/" + std::to_string(k)));
  }
  if (n.contains("activation")) {
    const std::string a = text(n.at("activation"), "/networks/activation");
    spec.network.activation = wrap("/networks/activation", [&] { return activation_from_string(a); });
  }
  if (n.contains("mode")) {
    const std::string md = text(n.at("mode"), "/networks/mode");
    spec.network.mode = wrap("/networks/mode", [&] { return network_mode_from_string(md); });
  }

  if (j.contains("training")) {
    const json& t = j.at("training");
    const std::string w = "/training";
    allow_keys(t, w, {"epochs", "lr", "n_train", "n_test", "seed", "beta", "m_e", "lr_decay", "probe_factor"});
    TrainConfig& c = spec.training;
    c.epochs = integer_or(t, w, "epochs", c.epochs);
    c.lr = number_or(t, w, "lr", c.lr);
    c.n_train = integer_or(t, w, "n_train", c.n_train);
    c.n_test = integer_or(t, w, "n_test", c.n_test);
    if (t.contains("seed")) {
      if (!t.at("seed").is_number_unsigned()) fail(w + "/seed", "expected a non-negative integer");
      c.seed = t.at("seed").get<std::uint64_t>();
    }
    c.beta = number_or(t, w, "beta", c.beta);
    c.m_e = integer_or(t, w, "m_e", c.m_e);
    c.lr_decay = number_or(t, w, "lr_decay", c.lr_decay);
    c.probe_factor = integer_or(t, w, "probe_factor", c.probe_factor);
  }

  if (j.contains("outputs")) {
    const json& o = j.at("outputs");
    allow_keys(o, "/outputs", {"grid", "box", "directory"});
    if (o.contains("grid")) {
      const json& gr = o.at("grid");
      if (!gr.is_array() || gr.size() != 2) fail("/outputs/grid", "expected [nx, ny]");
      spec.output.grid_nx = integer(gr[0], "/outputs/grid/0");
      spec.output.grid_ny = integer(gr[1], "/outputs/grid/1");
    }
    if (o.contains("box")) {
      const json& b = o.at("box");
      if (!b.is_array() || b.size() != 4) fail("/outputs/box", "expected [x0, x1, y0, y1]");
      spec.output.grid_box = GridBox{number(b[0], "/outputs/box/0"), number(b[1], "/outputs/box/1"),
                                     number(b[2], "/outputs/box/2"), number(b[3], "/outputs/box/3")};
    }
    if (o.contains("directory")) spec.output.directory = text(o.at("directory"), "/outputs/directory");
  }

  if (j.contains("reference")) {
    const json& r = j.at("reference");
    allow_keys(r, "/reference", {"type", "p", "r", "R"});
    const std::string type = text(need(r, "/reference", "type"), "/reference/type");
    if (type != "ring") fail("/reference/type", "unknown reference '" + type + "' (expected ring)");
    spec.ring = RingReference{number(need(r, "/reference", "p"), "/reference/p"),
                              number(need(r, "/reference", "r"), "/reference/r"),
                              number(need(r, "/reference", "R"), "/reference/R")};
  }

  wrap("", [&] {
    spec.validate();
    return 0;
  });
  return spec;
}

json problem_to_json(const ProblemSpec& spec) {
  json pieces = json::array();
  for (const BoundaryPiece& p : spec.domain.pieces) {
    json pj;
    pj["name"] = p.name;
    if (const auto* line = std::get_if<LineShape>(&p.shape)) {
      pj["shape"] = "line";
      pj["p0"] = point_json(line->p0);
      pj["p1"] = point_json(line->p1);
    } else {
      const auto& arc = std::get<ArcShape>(p.shape);
      pj["shape"] = "arc";
      pj["center"] = point_json(arc.center);
      pj["radius"] = arc.radius;
      pj["theta0"] = arc.theta0;
      pj["theta1"] = arc.theta1;
    }
    pj["normal"] = p.normal_side == NormalSide::Left ? "left" : "right";
    pj["subdomains"] = p.subdomains;
    pj["bc"] = bc_json(p.bc);
    pieces.push_back(std::move(pj));
  }
  const TrainConfig& t = spec.training;
  json j;
  j["name"] = spec.name;
  j["material"] = {{"lambda", spec.material.lambda()},
                   {"mu", spec.material.mu()},
                   {"mode", spec.material.mode() == PlaneMode::PlaneStrain ? "plane_strain" : "plane_stress"}};
  j["geometry"] = {{"subdomains", spec.domain.n_subdomains}, {"pieces", std::move(pieces)}};
  j["networks"] = {{"hidden", spec.network.hidden},
                   {"activation", std::string(to_string(spec.network.activation))},
                   {"mode", std::string(to_string(spec.network.mode))}};
  j["training"] = {{"epochs", t.epochs}, {"lr", t.lr},         {"n_train", t.n_train},
                   {"n_test", t.n_test}, {"seed", t.seed},     {"beta", t.beta},
                   {"m_e", t.m_e},       {"lr_decay", t.lr_decay}, {"probe_factor", t.probe_factor}};
  json out = {{"grid", {spec.output.grid_nx, spec.output.grid_ny}}, {"directory", spec.output.directory}};
  if (spec.output.grid_box) {
    const GridBox& b = *spec.output.grid_box;
    out["box"] = {b.x0, b.x1, b.y0, b.y1};
  }
  j["outputs"] = std::move(out);
  if (spec.ring) j["reference"] = {{"type", "ring"}, {"p", spec.ring->p}, {"r", spec.ring->r}, {"R", spec.ring->R}};
  return j;
}

namespace {

json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace

ProblemSpec load_config(const std::filesystem::path& path) {
  const json j = parse_file(path);
  try {
    return problem_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError("'" + path.string() + "': " + e.what());
  }
}

std::string write_config(const ProblemSpec& spec) { return problem_to_json(spec).dump(2) + "\n"; }

json checkpoint_to_json(const Networks& nets, const std::string& problem_name) {
  json subs = json::array();
  for (const NetPair& pair : nets) subs.push_back({{"phi", pair.phi}, {"psi", pair.psi}});
  return {{"format", "pihnn-checkpoint"}, {"version", 1}, {"problem", problem_name}, {"subdomains", std::move(subs)}};
}

Networks checkpoint_from_json(const json& j) {
  try {
    if (!j.is_object() || j.value("format", "") != "pihnn-checkpoint") {
      throw ConfigError("checkpoint: not a pihnn checkpoint");
    }
    if (j.at("version").get<int>() != 1) throw ConfigError("checkpoint: unsupported version");
    Networks nets;
    for (const json& s : j.at("subdomains")) {
      NetPair pair;
      from_json(s.at("phi"), pair.phi);
      from_json(s.at("psi"), pair.psi);
      nets.push_back(std::move(pair));
    }
    return nets;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

Networks load_checkpoint(const std::filesystem::path& path) {
  try {
    return checkpoint_from_json(parse_file(path));
  } catch (const ContractError& e) {
    throw ConfigError("'" + path.string() + "': " + e.what());
  }
}

void check_architecture(const Networks& nets, const ProblemSpec& problem) {
  if (static_cast<int>(nets.size()) != problem.domain.n_subdomains) {
    throw ConfigError("checkpoint has " + std::to_string(nets.size()) + " subdomain network pairs, problem '" +
                      problem.name + "' needs " + std::to_string(problem.domain.n_subdomains));
  }
  const std::vector<int> widths = HoloMLP::widths_for(problem.network.hidden);
  auto describe = [](const std::vector<int>& w) {
    std::string s;
    for (std::size_t k = 0; k < w.size(); ++k) s += (k ? "x" : "") + std::to_string(w[k]);
    return s;
  };
  for (std::size_t s = 0; s < nets.size(); ++s) {
    for (const HoloMLP* net : {&nets[s].phi, &nets[s].psi}) {
      if (net->widths() != widths) {
        throw ConfigError("checkpoint architecture " + describe(net->widths()) + " does not match the configured " +
                          describe(widths) + " (subdomain " + std::to_string(s) + ")");
      }
      if (net->activation != problem.network.activation || net->mode != problem.network.mode) {
        throw ConfigError("checkpoint activation or mode does not match the configuration (subdomain " +
                          std::to_string(s) + ")");
      }
    }
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace pihnn
