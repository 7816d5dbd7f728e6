#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "polyxport/harness.hpp"

namespace polyxport {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw ConfigError(std::string(where) + ": unknown key \"" + key + "\"");
  }
}

double number(const json& j, std::string_view where) {
  if (!j.is_number()) throw ConfigError(std::string(where) + ": expected a number");
  return j.get<double>();
}

std::uint64_t count(const json& j, std::string_view where) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
    throw ConfigError(std::string(where) + ": expected a non-negative integer");
  return j.get<std::uint64_t>();
}

std::string text(const json& j, std::string_view where) {
  if (!j.is_string()) throw ConfigError(std::string(where) + ": expected a string");
  return j.get<std::string>();
}

bool flag(const json& j, std::string_view where) {
  if (!j.is_boolean()) throw ConfigError(std::string(where) + ": expected true or false");
  return j.get<bool>();
}

std::vector<double> numbers(const json& j, std::string_view where) {
  if (!j.is_array()) throw ConfigError(std::string(where) + ": expected an array");
  std::vector<double> out;
  for (const auto& e : j) out.push_back(number(e, where));
  return out;
}

Vec vec(const json& j, std::string_view where, int dim) {
  const auto xs = numbers(j, where);
  if (static_cast<int>(xs.size()) != dim)
    throw ConfigError(std::string(where) + ": expected " + std::to_string(dim) + " components");
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = xs[static_cast<std::size_t>(i)];
  return v;
}

// Rotation applied after the basis; nullopt for zero angles.
std::optional<Mat> rotation(const json& j, int dim) {
  if (dim == 2) {
    const double a = number(j, "lattice.rotation");
    if (a == 0.0) return std::nullopt;
    return plane_rotation(2, 0, 1, a);
  }
  const auto angles = numbers(j, "lattice.rotation");
  if (angles.size() != 3) throw ConfigError("lattice.rotation: expected three angles in d = 3");
  if (angles[0] == 0.0 && angles[1] == 0.0 && angles[2] == 0.0) return std::nullopt;
  return plane_rotation(3, 0, 1, angles[0]) * plane_rotation(3, 0, 2, angles[1]) * plane_rotation(3, 1, 2, angles[2]);
}

AffineLattice parse_lattice(const json& j, int dim) {
  check_keys(j, "lattice", {"matrix", "basis", "rotation", "offset"});
  Mat m = Mat::identity(dim);
  std::optional<ExactMatrix> exact;
  if (j.contains("basis") && j.contains("matrix")) throw ConfigError("lattice: give either basis or matrix");
  if (j.contains("basis")) {
    const std::string b = text(j["basis"], "lattice.basis");
    if (b == "cubic") {
      exact = ExactMatrix{dim, {}, 1.0};
      for (int i = 0; i < dim; ++i)
        for (int k = 0; k < dim; ++k) exact->entries.push_back(Rational::make(i == k ? 1 : 0, 1));
    } else if (b == "bcc" && dim == 3) {
      m = bcc_matrix();
    } else {
      throw ConfigError("lattice.basis: expected \"cubic\" or (d = 3) \"bcc\"");
    }
  } else if (j.contains("matrix")) {
    const json& rows = j["matrix"];
    if (!rows.is_array() || static_cast<int>(rows.size()) != dim) throw ConfigError("lattice.matrix: expected d rows");
    bool all_exact = true;
    for (const auto& row : rows) {
      if (!row.is_array() || static_cast<int>(row.size()) != dim)
        throw ConfigError("lattice.matrix: expected d entries per row");
      for (const auto& e : row) all_exact = all_exact && (e.is_string() || e.is_number_integer());
    }
    if (all_exact) {
      ExactMatrix em{dim, {}, 1.0};
      for (const auto& row : rows)
        for (const auto& e : row) {
          try {
            em.entries.push_back(e.is_string() ? Rational::parse(e.get<std::string>())
                                               : Rational::make(e.get<std::int64_t>(), 1));
          } catch (const std::exception& ex) {
            throw ConfigError(std::string("lattice.matrix: ") + ex.what());
          }
        }
      const double det = em.determinant().to_double();
      if (!(det > 0.0)) throw ConfigError("lattice.matrix: determinant must be positive");
      em.scale = std::pow(det, -1.0 / dim);
      exact = em;
    } else {
      for (int i = 0; i < dim; ++i)
        for (int k = 0; k < dim; ++k) {
          const json& e = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
          m(i, k) = e.is_string() ? Rational::parse(e.get<std::string>()).to_double() : number(e, "lattice.matrix");
        }
      const double det = m.det();
      if (!(det > 0.0)) throw ConfigError("lattice.matrix: determinant must be positive");
      const double s = std::pow(det, -1.0 / dim);
      for (int i = 0; i < dim; ++i)
        for (int k = 0; k < dim; ++k) m(i, k) *= s;
    }
  }
  if (exact) m = exact->to_real();
  if (j.contains("rotation")) {
    if (const auto rot = rotation(j["rotation"], dim)) {
      m = m * *rot;
      exact.reset();
    }
  }
  const Vec omega = j.contains("offset") ? vec(j["offset"], "lattice.offset", dim) : Vec::zero(dim);
  try {
    return AffineLattice(m, omega, exact);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("lattice: ") + e.what());
  }
}

ConvexGrain parse_shape(const json& g, int id, int dim) {
  int given = 0;
  for (const char* k : {"box", "vertices", "halfspaces"}) given += g.contains(k) ? 1 : 0;
  if (given != 1) throw ConfigError("grain: give exactly one of box, vertices, halfspaces");
  if (g.contains("box")) {
    check_keys(g["box"], "grain.box", {"lo", "hi"});
    return ConvexGrain::box(id, vec(g["box"].at("lo"), "grain.box.lo", dim), vec(g["box"].at("hi"), "grain.box.hi", dim));
  }
  if (g.contains("vertices")) {
    std::vector<Vec> pts;
    if (!g["vertices"].is_array()) throw ConfigError("grain.vertices: expected an array");
    for (const auto& p : g["vertices"]) pts.push_back(vec(p, "grain.vertices", dim));
    return ConvexGrain::from_vertices(id, pts);
  }
  std::vector<Halfspace> faces;
  if (!g["halfspaces"].is_array()) throw ConfigError("grain.halfspaces: expected an array");
  for (const auto& h : g["halfspaces"]) {
    check_keys(h, "grain.halfspaces", {"normal", "offset"});
    faces.push_back({vec(h.at("normal"), "halfspace.normal", dim), number(h.at("offset"), "halfspace.offset")});
  }
  return ConvexGrain::from_halfspaces(id, faces);
}

void check_lattices(const Scene& scene) {
  const auto& media = scene.media();
  for (std::size_t i = 0; i < media.size(); ++i)
    for (std::size_t j = i + 1; j < media.size(); ++j) {
      if (media[i].kind != MediumKind::crystal || media[j].kind != MediumKind::crystal) continue;
      bool comm;
      try {
        comm = is_commensurable(media[i].lattice, media[j].lattice);
      } catch (const UndecidableError& e) {
        throw ConfigError(std::string("scene: ") + e.what());
      }
      if (comm)
        throw ConfigError("scene: grains " + std::to_string(i) + " and " + std::to_string(j) +
                          " carry commensurable lattices");
    }
}

std::shared_ptr<const Scene> scene_from_json(const json& j, bool assume_incommensurable) {
  check_keys(j, "scene", {"dim", "grains", "box", "anchor"});
  if (!j.contains("dim") || !j.contains("grains")) throw ConfigError("scene: dim and grains are required");
  const int dim = static_cast<int>(count(j["dim"], "scene.dim"));
  if (dim != 2 && dim != 3) throw ConfigError("scene.dim: must be 2 or 3");
  if (!j["grains"].is_array() || j["grains"].empty()) throw ConfigError("scene.grains: expected a non-empty array");
  std::vector<ConvexGrain> grains;
  std::vector<Medium> media;
  int id = 0;
  for (const auto& g : j["grains"]) {
    check_keys(g, "grain", {"box", "vertices", "halfspaces", "medium", "lattice"});
    try {
      grains.push_back(parse_shape(g, id, dim));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("grain " + std::to_string(id) + ": " + e.what());
    }
    Medium m;
    const std::string kind = g.contains("medium") ? text(g["medium"], "grain.medium") : "crystal";
    if (kind == "crystal") {
      m.kind = MediumKind::crystal;
      m.lattice = g.contains("lattice") ? parse_lattice(g["lattice"], dim) : parse_lattice(json::object(), dim);
    } else if (kind == "poisson") {
      if (g.contains("lattice")) throw ConfigError("grain: Poisson grains take no lattice");
      m.kind = MediumKind::poisson;
      m.lattice = AffineLattice::integer(dim);
    } else {
      throw ConfigError("grain.medium: expected \"crystal\" or \"poisson\"");
    }
    media.push_back(m);
    ++id;
  }
  std::optional<PeriodicBox> box;
  if (j.contains("box")) {
    check_keys(j["box"], "scene.box", {"lo", "hi"});
    box = PeriodicBox{vec(j["box"].at("lo"), "scene.box.lo", dim), vec(j["box"].at("hi"), "scene.box.hi", dim)};
  }
  std::optional<Vec> anchor;
  if (j.contains("anchor")) anchor = vec(j["anchor"], "scene.anchor", dim);
  std::shared_ptr<const Scene> scene;
  try {
    scene = std::make_shared<const Scene>(dim, std::move(grains), std::move(media), box, anchor);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("scene: ") + e.what());
  }
  if (!assume_incommensurable) check_lattices(*scene);
  return scene;
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

bool needs_lattices(const std::string& experiment) {
  return experiment == "freepath" || experiment == "transition" || experiment == "microsim";
}

}  // namespace

std::shared_ptr<const Scene> parse_scene(std::string_view text, bool assume_incommensurable) {
  return scene_from_json(parse_json(text), assume_incommensurable);
}

ExperimentConfig parse_config(std::string_view input) {
  json doc = parse_json(input);
  check_keys(doc, "config",
             {"experiment", "seed", "threads", "assume_incommensurable", "scene", "microsim", "start", "directions",
              "limit", "transition", "flight", "poisson", "kernel_tables", "psi", "thresholds"});
  ExperimentConfig c;
  if (doc.contains("experiment")) {
    c.experiment = text(doc["experiment"], "experiment");
    static const std::set<std::string> kinds{"freepath",         "transition", "flight",  "stationarity",
                                             "poisson-baseline", "kernel-tables", "microsim", "psi"};
    if (!kinds.count(c.experiment)) throw ConfigError("experiment: unknown kind \"" + c.experiment + "\"");
  }
  if (doc.contains("seed")) c.seed = count(doc["seed"], "seed");
  if (doc.contains("threads")) c.threads = static_cast<unsigned>(count(doc["threads"], "threads"));
  if (doc.contains("assume_incommensurable"))
    c.assume_incommensurable = flag(doc["assume_incommensurable"], "assume_incommensurable");
  if (doc.contains("scene"))
    c.scene = scene_from_json(doc["scene"], c.assume_incommensurable || !needs_lattices(c.experiment));
  const int dim = c.scene ? c.scene->dim() : 2;

  if (doc.contains("microsim")) {
    const json& m = doc["microsim"];
    check_keys(m, "microsim",
               {"r", "samples", "offset_mode", "chunk_length", "escape_cutoff", "fresh_poisson", "write_samples"});
    if (m.contains("r")) c.r_schedule = numbers(m["r"], "microsim.r");
    if (m.contains("samples")) c.samples = count(m["samples"], "microsim.samples");
    if (m.contains("offset_mode")) {
      const std::string mode = text(m["offset_mode"], "microsim.offset_mode");
      if (mode == "anchored")
        c.offset_mode = OffsetMode::anchored;
      else if (mode == "random")
        c.offset_mode = OffsetMode::random_offset;
      else
        throw ConfigError("microsim.offset_mode: expected \"anchored\" or \"random\"");
    }
    if (m.contains("chunk_length")) c.chunk_length = number(m["chunk_length"], "microsim.chunk_length");
    if (m.contains("escape_cutoff")) c.escape_cutoff = number(m["escape_cutoff"], "microsim.escape_cutoff");
    if (m.contains("fresh_poisson")) c.fresh_poisson = flag(m["fresh_poisson"], "microsim.fresh_poisson");
    if (m.contains("write_samples")) c.write_samples = flag(m["write_samples"], "microsim.write_samples");
    for (std::size_t i = 0; i < c.r_schedule.size(); ++i) {
      if (!(c.r_schedule[i] > 0.0)) throw ConfigError("microsim.r: radii must be positive");
      if (i > 0 && !(c.r_schedule[i] < c.r_schedule[i - 1]))
        throw ConfigError("microsim.r: schedule must be strictly decreasing");
    }
    if (c.samples < 1000) throw ConfigError("microsim.samples: at least 1000 samples are required");
  }

  c.base = Vec::zero(dim);
  if (doc.contains("start")) {
    const json& s = doc["start"];
    check_keys(s, "start", {"x", "q", "on_scatterer", "beta"});
    if (s.contains("x")) c.base = vec(s["x"], "start.x", dim);
    if (s.contains("q")) {
      if (s["q"].is_string()) {
        if (s["q"].get<std::string>() != "random") throw ConfigError("start.q: expected \"random\" or a vector");
      } else {
        c.q = vec(s["q"], "start.q", dim);
      }
    }
    if (s.contains("on_scatterer")) c.on_scatterer = flag(s["on_scatterer"], "start.on_scatterer");
    if (s.contains("beta")) {
      if (s["beta"].is_string()) {
        if (s["beta"].get<std::string>() != "forward") throw ConfigError("start.beta: expected \"forward\" or a vector");
      } else {
        c.start.kind = StartOffset::Kind::offset;
        c.start.offset = vec(s["beta"], "start.beta", dim - 1);
        if (!(c.start.offset.norm2() < 1.0)) throw ConfigError("start.beta: offset must lie in the open unit ball");
      }
    }
  }
  if (doc.contains("directions")) {
    const json& d = doc["directions"];
    check_keys(d, "directions", {"law", "axis", "half_angle"});
    const std::string law = d.contains("law") ? text(d["law"], "directions.law") : "uniform";
    if (law == "cap") {
      c.law.kind = DirectionLaw::Kind::cap;
      if (!d.contains("axis") || !d.contains("half_angle"))
        throw ConfigError("directions: a cap needs axis and half_angle");
      c.law.axis = vec(d["axis"], "directions.axis", dim).normalized();
      c.law.half_angle = number(d["half_angle"], "directions.half_angle");
      if (!(c.law.half_angle > 0.0 && c.law.half_angle <= std::numbers::pi))
        throw ConfigError("directions.half_angle: must lie in (0, pi]");
    } else if (law != "uniform") {
      throw ConfigError("directions.law: expected \"uniform\" or \"cap\"");
    } else if (d.contains("axis") || d.contains("half_angle")) {
      throw ConfigError("directions: axis and half_angle apply to caps only");
    }
  }
  if (doc.contains("limit")) {
    const json& l = doc["limit"];
    check_keys(l, "limit", {"directions", "grid_points"});
    if (l.contains("directions")) c.directions = static_cast<int>(count(l["directions"], "limit.directions"));
    if (l.contains("grid_points")) c.grid_points = static_cast<int>(count(l["grid_points"], "limit.grid_points"));
    if (c.directions < 1 || c.grid_points < 2) throw ConfigError("limit: need at least 1 direction and 2 grid points");
  }
  if (doc.contains("transition")) {
    const json& t = doc["transition"];
    check_keys(t, "transition", {"xi_edges", "w_edges"});
    if (t.contains("xi_edges")) c.xi_edges = numbers(t["xi_edges"], "transition.xi_edges");
    if (t.contains("w_edges")) c.w_edges = numbers(t["w_edges"], "transition.w_edges");
  }
  if (dim == 3 && !(doc.contains("transition") && doc["transition"].contains("w_edges")))
    c.w_edges = {0.0, 0.5, 0.7071067811865476, 0.8660254037844386, 1.0};
  for (const auto* edges : {&c.xi_edges, &c.w_edges}) {
    if (edges->size() < 2) throw ConfigError("transition: need at least two edges");
    for (std::size_t i = 1; i < edges->size(); ++i)
      if (!((*edges)[i] > (*edges)[i - 1])) throw ConfigError("transition: edges must increase");
  }
  if (c.xi_edges.front() < 0.0) throw ConfigError("transition.xi_edges: must be non-negative");
  if (c.w_edges.front() < (dim == 2 ? -1.0 : 0.0) || c.w_edges.back() > 1.0)
    throw ConfigError("transition.w_edges: outside the parameter range");

  if (doc.contains("flight")) {
    const json& f = doc["flight"];
    check_keys(f, "flight", {"particles", "time", "split", "seeds", "sampler", "report"});
    if (f.contains("particles")) c.flight.particles = count(f["particles"], "flight.particles");
    if (f.contains("time")) c.flight.time = number(f["time"], "flight.time");
    if (f.contains("split")) c.flight.split = number(f["split"], "flight.split");
    if (f.contains("seeds")) c.flight.seeds = count(f["seeds"], "flight.seeds");
    if (f.contains("sampler")) {
      const std::string s = text(f["sampler"], "flight.sampler");
      if (s == "auto")
        c.flight.sampler = SamplerKind::automatic;
      else if (s == "factorized")
        c.flight.sampler = SamplerKind::factorized;
      else if (s == "rejection")
        c.flight.sampler = SamplerKind::rejection;
      else
        throw ConfigError("flight.sampler: expected \"auto\", \"factorized\" or \"rejection\"");
    }
    if (f.contains("report")) {
      c.flight.report = text(f["report"], "flight.report");
      if (c.flight.report != "stationarity" && c.flight.report != "ncollision" && c.flight.report != "marginals")
        throw ConfigError("flight.report: expected stationarity, ncollision or marginals");
    }
    if (!(c.flight.time >= 0.0) || !(c.flight.split >= 0.0 && c.flight.split <= c.flight.time))
      throw ConfigError("flight: need 0 <= split <= time");
    if (c.flight.seeds < 1 || c.flight.particles < 1) throw ConfigError("flight: need particles and seeds");
  }
  if (doc.contains("poisson")) {
    const json& p = doc["poisson"];
    check_keys(p, "poisson", {"gap_scene", "gap_start"});
    if (p.contains("gap_scene")) c.gap_scene = scene_from_json(p["gap_scene"], true);
    if (p.contains("gap_start")) {
      if (!c.gap_scene) throw ConfigError("poisson.gap_start: needs gap_scene");
      c.gap_start = vec(p["gap_start"], "poisson.gap_start", c.gap_scene->dim());
    }
  }
  if (doc.contains("kernel_tables")) {
    const json& k = doc["kernel_tables"];
    check_keys(k, "kernel_tables", {"media", "dims", "xi", "w", "z"});
    if (k.contains("media")) {
      c.kernels.media.clear();
      if (!k["media"].is_array()) throw ConfigError("kernel_tables.media: expected an array");
      for (const auto& m : k["media"]) {
        const std::string s = text(m, "kernel_tables.media");
        if (s != "crystal" && s != "poisson") throw ConfigError("kernel_tables.media: expected crystal or poisson");
        c.kernels.media.push_back(s);
      }
    }
    if (k.contains("dims")) {
      c.kernels.dims.clear();
      for (double d : numbers(k["dims"], "kernel_tables.dims")) {
        if (d != 2.0 && d != 3.0) throw ConfigError("kernel_tables.dims: must be 2 or 3");
        c.kernels.dims.push_back(static_cast<int>(d));
      }
    }
    if (k.contains("xi")) c.kernels.xi = numbers(k["xi"], "kernel_tables.xi");
    for (const char* key : {"w", "z"}) {
      if (!k.contains(key)) continue;
      auto& target = key[0] == 'w' ? c.kernels.w : c.kernels.z;
      if (!k[key].is_array()) throw ConfigError("kernel_tables: expected an array of parameters");
      for (const auto& e : k[key]) target.push_back(numbers(e, "kernel_tables parameter"));
    }
    if (!c.kernels.z.empty() && c.kernels.z.size() != c.kernels.w.size())
      throw ConfigError("kernel_tables: w and z lists must have equal length");
  }
  if (doc.contains("psi")) {
    const json& p = doc["psi"];
    check_keys(p, "psi", {"x", "v", "xi", "w", "z"});
    if (!c.scene) throw ConfigError("psi: needs a scene");
    PsiQuery q;
    q.x = vec(p.at("x"), "psi.x", dim);
    q.v = vec(p.at("v"), "psi.v", dim).normalized();
    q.xi = numbers(p.at("xi"), "psi.xi");
    if (p.contains("w")) q.w = vec(p["w"], "psi.w", dim - 1);
    if (p.contains("z")) q.z = vec(p["z"], "psi.z", dim - 1);
    c.psi = q;
  }
  if (doc.contains("thresholds")) {
    const json& t = doc["thresholds"];
    check_keys(t, "thresholds", {"ks", "alpha", "poisson_ks", "gap_ks"});
    if (t.contains("ks")) c.thresholds.ks = number(t["ks"], "thresholds.ks");
    if (t.contains("alpha")) c.thresholds.alpha = number(t["alpha"], "thresholds.alpha");
    if (t.contains("poisson_ks")) c.thresholds.poisson_ks = number(t["poisson_ks"], "thresholds.poisson_ks");
    if (t.contains("gap_ks")) c.thresholds.gap_ks = number(t["gap_ks"], "thresholds.gap_ks");
  }
  doc.erase("threads");
  c.canonical = doc.dump();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config.canonical)));
  return buf;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string csv_field(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

void Table::add(std::vector<std::string> row) {
  if (row.size() != columns.size()) throw std::logic_error("Table " + name + ": row width differs from the header");
  rows.push_back(std::move(row));
}

std::string Table::to_csv() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += csv_field(fields[i]);
    }
    out += "\r\n";
  };
  line(columns);
  for (const auto& r : rows) line(r);
  return out;
}

bool RunReport::passed() const {
  for (const auto& v : verdicts)
    if (!v.pass) return false;
  return true;
}

void write_report(const RunReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& content) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("cannot write " + path.string());
  };
  const std::string stem = report.experiment.empty() ? "run" : report.experiment;
  for (const auto& t : report.tables) write(stem + "_" + t.name + ".csv", t.to_csv());
  write(stem + "_summary.json", report.summary + "\n");
  nlohmann::ordered_json timings = nlohmann::ordered_json::object();
  for (const auto& [name, seconds] : report.timings) timings[name] = seconds;
  write(stem + "_timings.json", timings.dump(2) + "\n");
}

}  // namespace polyxport
