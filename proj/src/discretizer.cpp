#include "aquadem/discretizer.hpp"

#include <fstream>
#include <istream>
#include <sstream>

#include "aquadem/envs.hpp"
#include "aquadem/errors.hpp"
#include "aquadem/quantizer.hpp"
#include "aquadem/text_io.hpp"

namespace aquadem {

namespace {

struct GeneratorHeader {
  std::string trait;
  int k = 0;
  double temperature = 0.0;
  int state_dim = 0;
  int action_dim = 0;
  Bounds bounds;
};

GeneratorHeader parse_header(std::istream& is) {
  std::string word, version;
  is >> word >> version;
  if (word != "aquadem-quantizer" || version != "v1") {
    throw InputError("bad quantizer checkpoint header");
  }
  GeneratorHeader h;
  is >> word >> h.trait;
  if (word != "trait") throw InputError("quantizer checkpoint: expected trait");
  is >> word >> h.k;
  if (word != "K") throw InputError("quantizer checkpoint: expected K");
  is >> word >> h.temperature;
  if (word != "temperature") {
    throw InputError("quantizer checkpoint: expected temperature");
  }
  is >> word >> h.state_dim;
  if (word != "state_dim") {
    throw InputError("quantizer checkpoint: expected state_dim");
  }
  is >> word >> h.action_dim;
  if (word != "action_dim") {
    throw InputError("quantizer checkpoint: expected action_dim");
  }
  is >> word;
  if (word != "bounds") throw InputError("quantizer checkpoint: expected bounds");
  for (int d = 0; d < h.action_dim; ++d) {
    double lo = 0.0, hi = 0.0;
    if (!(is >> lo >> hi)) {
      throw InputError("quantizer checkpoint: truncated bounds");
    }
    h.bounds.emplace_back(lo, hi);
  }
  return h;
}

}  // namespace

std::unique_ptr<CandidateGenerator> load_generator(std::istream& is) {
  const GeneratorHeader h = parse_header(is);
  if (h.trait == "aquadem" || h.trait == "random" || h.trait == "mdn") {
    auto model = std::make_unique<QuantizerModel>(QuantizerModel::load_body(
        is, h.trait, h.k, h.temperature, h.action_dim, h.bounds));
    // An mdn checkpoint also carries a logit head; as a plain candidate
    // generator only the base matters.
    return model;
  }
  if (h.trait == "kmeans") {
    return std::make_unique<KmeansGenerator>(
        KmeansGenerator::load_body(is, h.k, h.action_dim, h.bounds));
  }
  if (h.trait == "bangbang") {
    return std::make_unique<BangBangGenerator>(
        BangBangGenerator::load_body(is, h.state_dim, h.action_dim));
  }
  throw InputError("unknown generator trait: " + h.trait);
}

std::unique_ptr<CandidateGenerator> load_generator_file(
    const std::filesystem::path& path) {
  std::istringstream is(read_text_file(path));
  return load_generator(is);
}

void save_generator_file(const CandidateGenerator& gen,
                         const std::filesystem::path& path) {
  std::ostringstream os;
  gen.save(os);
  write_text_file(path, os.str());
}

MdnModel load_mdn(std::istream& is) {
  const GeneratorHeader h = parse_header(is);
  if (h.trait != "mdn") {
    throw InputError("expected an mdn checkpoint, got trait " + h.trait);
  }
  MdnModel model;
  model.base = QuantizerModel::load_body(is, h.trait, h.k, h.temperature,
                                         h.action_dim, h.bounds);
  std::string word;
  is >> word;
  if (word != "logit_head") {
    throw InputError("mdn checkpoint: expected logit_head");
  }
  model.logit_head = nn::Mlp::load(is);
  return model;
}

MdnModel load_mdn_file(const std::filesystem::path& path) {
  std::istringstream is(read_text_file(path));
  return load_mdn(is);
}

}  // namespace aquadem
