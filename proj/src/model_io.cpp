#include <bit>
#include <cstdint>
#include <fstream>

#include <json.hpp>

#include "efy/model.hpp"

namespace efy {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "efy-params";
constexpr int kVersion = 1;

void put_le(std::ostream& out, double x) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
  char bytes[8];
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<char>(bits & 0xffu);
    bits >>= 8;
  }
  out.write(bytes, 8);
}

bool get_le(std::istream& in, double& x) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) return false;
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | bytes[i];
  x = std::bit_cast<double>(bits);
  return true;
}

}  // namespace

void save_params(const std::string& path, const ModelParams& params) {
  const Vec flat = flatten_params(params);
  json header;
  header["format"] = kFormat;
  header["version"] = kVersion;
  header["architecture"] = architecture_name(params.spec.architecture);
  header["input_dim"] = params.spec.input_dim;
  header["num_labels"] = params.spec.num_labels;
  header["hidden"] = params.spec.hidden;
  header["prior_hidden"] = params.spec.prior_hidden;
  header["input_concave"] = params.spec.input_concave;
  header["prior_activation"] = params.spec.prior_activation == PriorActivation::Relu ? "relu" : "softplus";
  header["seed"] = params.seed;
  header["count"] = flat.size();
  json tensors = json::array();
  for (const auto& s : param_shapes(params)) tensors.push_back({{"name", s.name}, {"rows", s.rows}, {"cols", s.cols}});
  header["tensors"] = tensors;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << header.dump() << '\n';
  for (Eigen::Index i = 0; i < flat.size(); ++i) put_le(out, flat[i]);
  if (!out) throw std::runtime_error("write failed: " + path);
}

ModelParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open params file " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing params header");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(1, std::string("bad params header: ") + e.what());
  }
  try {
    if (header.at("format") != kFormat || header.at("version") != kVersion) {
      throw ParseError(1, "unsupported params format");
    }
    ModelSpec spec;
    const auto arch = architecture_from_name(header.at("architecture").get<std::string>());
    if (!arch) throw ParseError(1, "unknown architecture");
    spec.architecture = *arch;
    spec.input_dim = header.at("input_dim").get<Eigen::Index>();
    spec.num_labels = header.at("num_labels").get<Eigen::Index>();
    spec.hidden = header.at("hidden").get<Eigen::Index>();
    spec.prior_hidden = header.at("prior_hidden").get<Eigen::Index>();
    spec.input_concave = header.at("input_concave").get<bool>();
    spec.prior_activation =
        header.at("prior_activation").get<std::string>() == "relu" ? PriorActivation::Relu : PriorActivation::Softplus;
    ModelParams params = init_params(spec, header.at("seed").get<std::uint64_t>());
    const auto count = header.at("count").get<Eigen::Index>();
    Vec flat(count);
    for (Eigen::Index i = 0; i < count; ++i) {
      if (!get_le(in, flat[i])) throw ParseError(2, "params file truncated at value " + std::to_string(i));
    }
    char extra;
    if (in.read(&extra, 1)) throw ParseError(2, "trailing bytes after params");
    assign_params(params, flat);
    return params;
  } catch (const json::exception& e) {
    throw ParseError(1, std::string("bad params header: ") + e.what());
  }
}

}  // namespace efy
