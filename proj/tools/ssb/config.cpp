#include "config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ssb::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw UsageError("config key '" + key + "': cannot parse '" + text + "' as a number");
  return v;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(parse_number<int>(key, item));
  }
  return out;
}

class Reader {
 public:
  explicit Reader(const KeyValues& v) : v_(v) {}
  const std::string& str(const std::string& key) const { return v_.at(key); }
  double real(const std::string& key) const { return parse_number<double>(key, str(key)); }
  int integer(const std::string& key) const { return parse_number<int>(key, str(key)); }
  std::uint64_t seed(const std::string& key) const { return parse_number<std::uint64_t>(key, str(key)); }
  std::vector<int> ints(const std::string& key) const { return parse_int_list(key, str(key)); }

 private:
  const KeyValues& v_;
};

void check(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

bool file_exists(const std::string& path) { return std::ifstream(path).good(); }

}  // namespace

std::pair<std::string, std::string> parse_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw UsageError("expected key=value, got '" + text + "'");
  const std::string key = trim(text.substr(0, eq));
  if (key.empty()) throw UsageError("empty key in '" + text + "'");
  return {key, trim(text.substr(eq + 1))};
}

KeyValues parse_config_text(const std::string& text, const std::string& origin) {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (trim(line).empty()) continue;
    try {
      auto [k, v] = parse_assignment(line);
      out[k] = v;
    } catch (const UsageError& e) {
      throw UsageError(origin + ":" + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

KeyValues read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

const KeyValues& default_values() {
  static const KeyValues d = {
      {"preset", ""},
      {"dataset.name", "matern"},
      {"dataset.n", "20"},
      {"dataset.dim", "1"},
      {"dataset.nu", "3.5"},
      {"dataset.lengthscale", "1"},
      {"dataset.sigma", "1"},
      {"kernel.family", "matern"},
      {"kernel.nu", "1.5"},
      {"kernel.lengthscale", ""},  // 3 for nu = 1.5, 2 for nu = 2.5, else 1
      {"kernel.c", "1"},
      {"kernel.order", "2"},
      {"grid.K", "20"},
      {"grid.horizon", "2"},
      {"basis.M", ""},  // 16 per derivative axis when empty
      {"basis.C", "3"},
      {"basis.layout", "factorized"},
      {"solver.tol", "1e-8"},
      {"solver.max_iters", "200"},
      {"seeds.data", "0"},
      {"seeds.sample", "0"},
      {"paths.input", ""},
      {"paths.output", "."},
      {"sample.n", "100"},
      {"sample.start", ""},
      {"evaluate.mode", "tracking"},
      {"evaluate.samples", ""},
      {"evaluate.predicted", ""},
      {"evaluate.reference", ""},
      {"lot.j", "1"},
      {"lot.samples", "0"},
      {"oracle.iters", "10"},
      {"bench.M", "16,32,64"},
      {"bench.d", "1,2,3"},
      {"bench.n", "20"},
      {"bench.K", "10"},
      {"bench.iters", "3"},
  };
  return d;
}

const std::map<std::string, KeyValues>& presets() {
  // basis.M is per dimension; for nu = 2.5 it is (velocity, acceleration) bins
  static const std::map<std::string, KeyValues> p = {
      {"matern",
       {{"kernel.nu", "2.5"}, {"basis.M", "40,5"}, {"kernel.c", "1"}, {"dataset.name", "matern"},
        {"dataset.n", "20"}, {"dataset.dim", "1"}, {"grid.K", "20"}}},
      {"matern2d",
       {{"kernel.nu", "2.5"}, {"basis.M", "8,4"}, {"kernel.c", "1"}, {"dataset.name", "matern"},
        {"dataset.n", "25"}, {"dataset.dim", "2"}, {"grid.K", "20"}}},
      {"tristable",
       {{"kernel.nu", "1.5"}, {"basis.M", "32"}, {"kernel.c", "1"}, {"dataset.name", "tristable"},
        {"dataset.n", "20"}, {"dataset.dim", "2"}, {"grid.K", "20"}}},
      {"nbody",
       {{"kernel.nu", "2.5"}, {"basis.M", "4,3"}, {"kernel.c", "4"}, {"dataset.name", "nbody"},
        {"dataset.n", "8"}, {"dataset.dim", "3"}, {"grid.K", "50"}}},
      {"petal", {{"kernel.nu", "1.5"}, {"basis.M", "20"}, {"kernel.c", "0.5"}, {"grid.K", "5"}}},
      {"converging", {{"kernel.nu", "1.5"}, {"basis.M", "30"}, {"kernel.c", "0.5"}, {"grid.K", "3"}}},
      {"eb", {{"kernel.nu", "1.5"}, {"basis.M", "12"}, {"kernel.c", "1"}, {"grid.K", "4"}}},
      {"dyngen", {{"kernel.nu", "1.5"}, {"basis.M", "4"}, {"kernel.c", "0.5"}, {"grid.K", "4"}}},
  };
  return p;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig resolve_config(const KeyValues& file, const KeyValues& flags) {
  const KeyValues& defaults = default_values();
  for (const KeyValues* layer : {&file, &flags})
    for (const auto& [k, v] : *layer)
      if (!defaults.contains(k)) throw UsageError("unknown config key '" + k + "'");

  KeyValues v = defaults;
  std::string preset = file.contains("preset") ? file.at("preset") : "";
  if (flags.contains("preset")) preset = flags.at("preset");
  if (!preset.empty()) {
    const auto it = presets().find(preset);
    if (it == presets().end()) throw UsageError("unknown preset '" + preset + "'");
    for (const auto& [k, val] : it->second) v[k] = val;
  }
  for (const KeyValues* layer : {&file, &flags})
    for (const auto& [k, val] : *layer) v[k] = val;

  RunConfig c;
  const Reader r(v);
  c.dataset.name = r.str("dataset.name");
  c.dataset.n = r.integer("dataset.n");
  c.dataset.dim = r.integer("dataset.dim");
  c.dataset.nu = r.real("dataset.nu");
  c.dataset.lengthscale = r.real("dataset.lengthscale");
  c.dataset.sigma = r.real("dataset.sigma");
  check(c.dataset.n >= 1, "dataset.n must be >= 1");
  check(c.dataset.dim >= 1, "dataset.dim must be >= 1");

  c.kernel.family = r.str("kernel.family");
  check(c.kernel.family == "matern" || c.kernel.family == "ibm", "kernel.family must be matern or ibm");
  c.kernel.nu = r.real("kernel.nu");
  c.kernel.c = r.real("kernel.c");
  check(c.kernel.c > 0.0, "kernel.c must be > 0");
  c.kernel.order = r.integer("kernel.order");
  if (c.kernel.family == "matern") {
    const double m = c.kernel.nu + 0.5;
    check(m >= 1.0 && m == static_cast<int>(m), "kernel.nu must be a half-integer");
    c.kernel.order = static_cast<int>(m);
  }
  check(c.kernel.order >= 1, "kernel.order must be >= 1");
  if (v.at("kernel.lengthscale").empty())
    v["kernel.lengthscale"] = c.kernel.nu == 1.5 ? "3" : c.kernel.nu == 2.5 ? "2" : "1";
  c.kernel.lengthscale = r.real("kernel.lengthscale");
  check(c.kernel.lengthscale > 0.0, "kernel.lengthscale must be > 0");

  c.grid.K = r.integer("grid.K");
  c.grid.horizon = r.real("grid.horizon");
  check(c.grid.K >= 1, "grid.K must be >= 1");
  check(c.grid.horizon > 0.0, "grid.horizon must be > 0");

  c.basis.M = r.ints("basis.M");
  for (int m : c.basis.M) check(m >= 1, "basis.M entries must be >= 1");
  if (!c.basis.M.empty())
    check(static_cast<int>(c.basis.M.size()) == c.kernel.order - 1,
          "basis.M needs " + std::to_string(c.kernel.order - 1) + " entries for this kernel");
  c.basis.C = r.real("basis.C");
  check(c.basis.C > 0.0, "basis.C must be > 0");
  const std::string layout = r.str("basis.layout");
  check(layout == "factorized" || layout == "dense", "basis.layout must be factorized or dense");
  c.basis.layout = layout == "dense" ? GammaLayout::Dense : GammaLayout::Factorized;

  c.solver.tol = r.real("solver.tol");
  c.solver.max_iters = r.integer("solver.max_iters");
  check(c.solver.tol >= 0.0, "solver.tol must be >= 0");
  check(c.solver.max_iters >= 1, "solver.max_iters must be >= 1");

  c.seeds.data = r.seed("seeds.data");
  c.seeds.sample = r.seed("seeds.sample");

  c.paths.input = r.str("paths.input");
  c.paths.output = r.str("paths.output");
  check(!c.paths.output.empty(), "paths.output must not be empty");
  if (!c.paths.input.empty()) check(file_exists(c.paths.input), "input file " + c.paths.input + " does not exist");

  c.sample.n = r.integer("sample.n");
  check(c.sample.n >= 0, "sample.n must be >= 0");
  if (!r.str("sample.start").empty()) c.sample.start = r.integer("sample.start");

  c.evaluate.mode = r.str("evaluate.mode");
  check(c.evaluate.mode == "tracking" || c.evaluate.mode == "cloud", "evaluate.mode must be tracking or cloud");
  c.evaluate.samples = r.str("evaluate.samples");
  c.evaluate.predicted = r.str("evaluate.predicted");
  c.evaluate.reference = r.str("evaluate.reference");
  for (const std::string* p : {&c.evaluate.samples, &c.evaluate.predicted, &c.evaluate.reference})
    if (!p->empty()) check(file_exists(*p), "file " + *p + " does not exist");

  c.lot.j = r.integer("lot.j");
  c.lot.samples = r.integer("lot.samples");
  check(c.lot.samples >= 0, "lot.samples must be >= 0");
  c.oracle_iters = r.integer("oracle.iters");
  check(c.oracle_iters >= 1, "oracle.iters must be >= 1");

  c.bench.M = r.ints("bench.M");
  c.bench.d = r.ints("bench.d");
  c.bench.n = r.integer("bench.n");
  c.bench.K = r.integer("bench.K");
  c.bench.iters = r.integer("bench.iters");
  check(!c.bench.M.empty() && !c.bench.d.empty(), "bench.M and bench.d must not be empty");
  for (int m : c.bench.M) check(m >= 1, "bench.M entries must be >= 1");
  for (int d : c.bench.d) check(d >= 1, "bench.d entries must be >= 1");
  check(c.bench.n >= 1 && c.bench.K >= 1 && c.bench.iters >= 1, "bench.n, bench.K and bench.iters must be >= 1");

  v["preset"] = preset;
  c.values = v;
  std::string canon;
  for (const auto& [k, val] : v)
    if (k != "paths.output") canon += k + "=" + val + "\n";
  c.hash = fnv1a_hex(canon);
  return c;
}

KernelSpec RunConfig::prior_for(const SnapshotSet& data) const {
  std::vector<double> sigma = data.pooled_std();
  for (double& s : sigma) s *= kernel.c;
  if (kernel.family == "ibm") return KernelSpec::integrated_bm(kernel.order, sigma);
  return KernelSpec::matern(kernel.nu, kernel.lengthscale, sigma);
}

std::vector<int> RunConfig::bins_for(int order) const {
  if (!basis.M.empty()) return basis.M;
  return std::vector<int>(static_cast<std::size_t>(order - 1), 16);
}

}  // namespace ssb::cli
