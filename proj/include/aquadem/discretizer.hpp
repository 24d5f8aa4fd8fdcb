#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace aquadem {

using Vec = std::vector<double>;
using Bounds = std::vector<std::pair<double, double>>;

// The K candidate actions a discretizer proposes at one state. Head order is
// stable: index k always refers to the same head across states and calls.
struct CandidateSet {
  Vec state;
  std::vector<Vec> actions;
};

// A discretizer: maps a state to K candidate actions. Implemented by the
// trained quantizer, the k-means and random ablations, and the bang-bang
// uniform grid.
class CandidateGenerator {
 public:
  virtual ~CandidateGenerator() = default;
  virtual int k() const = 0;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual std::string trait() const = 0;
  virtual CandidateSet candidates(std::span<const double> state) const = 0;
  virtual void save(std::ostream& os) const = 0;
};

// Factory over every known trait (aquadem, mdn, kmeans, random, bangbang).
std::unique_ptr<CandidateGenerator> load_generator(std::istream& is);
std::unique_ptr<CandidateGenerator> load_generator_file(
    const std::filesystem::path& path);
void save_generator_file(const CandidateGenerator& gen,
                         const std::filesystem::path& path);

}  // namespace aquadem
