#pragma once

// Run configuration: flat `key = value` lines with dotted sections, '#'
// comments. Layers apply in order defaults < preset < file < --set flags.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssb/gap_prior.hpp"
#include "ssb/marginals.hpp"
#include "ssb/wavelet.hpp"

namespace ssb::cli {

// Bad flags, unknown keys, unparseable values, missing files: exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using KeyValues = std::map<std::string, std::string>;

KeyValues parse_config_text(const std::string& text, const std::string& origin);
KeyValues read_config_file(const std::string& path);
// "key=value"
std::pair<std::string, std::string> parse_assignment(const std::string& text);

const KeyValues& default_values();
const std::map<std::string, KeyValues>& presets();

struct RunConfig {
  struct Dataset {
    std::string name;
    int n = 20;
    int dim = 1;
    double nu = 3.5;
    double lengthscale = 1.0;
    double sigma = 1.0;
  } dataset;
  struct Kernel {
    std::string family;  // matern | ibm
    double nu = 1.5;
    double lengthscale = 3.0;
    double c = 1.0;
    int order = 2;
  } kernel;
  struct Grid {
    int K = 20;
    double horizon = 2.0;
  } grid;
  struct Basis {
    std::vector<int> M;  // bins per derivative axis, same for every dimension
    double C = 3.0;
    GammaLayout layout = GammaLayout::Factorized;
  } basis;
  struct Solver {
    double tol = 1e-8;
    int max_iters = 200;
  } solver;
  struct Seeds {
    std::uint64_t data = 0;
    std::uint64_t sample = 0;
  } seeds;
  struct Paths {
    std::string input;
    std::string output;
  } paths;
  struct Sample {
    int n = 100;
    std::optional<int> start;
  } sample;
  struct Evaluate {
    std::string mode;  // tracking | cloud
    std::string samples;
    std::string predicted;
    std::string reference;
  } evaluate;
  struct Lot {
    int j = 1;
    int samples = 0;
  } lot;
  int oracle_iters = 10;
  struct Bench {
    std::vector<int> M;
    std::vector<int> d;
    int n = 20;
    int K = 10;
    int iters = 3;
  } bench;

  KeyValues values;  // resolved key/value view; the hash covers all but paths.output
  std::string hash;  // 16 hex digits

  // Matern or integrated-BM prior with sigma = c * sigma_data per dimension.
  KernelSpec prior_for(const SnapshotSet& data) const;
  // bins per derivative axis, shared by all dimensions; 16 each when unset
  std::vector<int> bins_for(int order) const;
};

// Merge the layers and validate every value. Throws UsageError.
RunConfig resolve_config(const KeyValues& file, const KeyValues& flags);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace ssb::cli
