#include "fisor/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "fisor/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts unsupported");

namespace fisor {

namespace {

constexpr char kMagic[8] = {'F', 'S', 'R', 'N', 'E', 'T', '0', '1'};

void write_params(std::ofstream& f, const std::vector<std::vector<double>>& ws,
                  const std::vector<std::vector<double>>& bs) {
  for (std::size_t l = 0; l < ws.size(); ++l) {
    f.write(reinterpret_cast<const char*>(ws[l].data()),
            static_cast<std::streamsize>(ws[l].size() * sizeof(double)));
    f.write(reinterpret_cast<const char*>(bs[l].data()),
            static_cast<std::streamsize>(bs[l].size() * sizeof(double)));
  }
}

void read_params(std::ifstream& f, std::vector<std::vector<double>>& ws,
                 std::vector<std::vector<double>>& bs) {
  for (std::size_t l = 0; l < ws.size(); ++l) {
    f.read(reinterpret_cast<char*>(ws[l].data()),
           static_cast<std::streamsize>(ws[l].size() * sizeof(double)));
    f.read(reinterpret_cast<char*>(bs[l].data()),
           static_cast<std::streamsize>(bs[l].size() * sizeof(double)));
  }
  if (!f) throw DataError(DataError::Kind::truncated, "checkpoint: truncated parameter blob");
}

}  // namespace

void save_checkpoint(const std::string& path, const Mlp& net, const AdamState* adam,
                     std::uint64_t step, std::uint64_t seed, const nlohmann::json& extras) {
  nlohmann::json header = extras;
  header["widths"] = net.widths;
  header["step"] = step;
  header["seed"] = seed;
  if (adam != nullptr) {
    header["adam"] = {{"lr", adam->lr},
                      {"beta1", adam->beta1},
                      {"beta2", adam->beta2},
                      {"eps", adam->eps},
                      {"step", adam->step_count}};
  } else {
    header["adam"] = nullptr;
  }
  const std::string hdr = header.dump();

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError(DataError::Kind::io, "checkpoint: cannot open " + path);
  f.write(kMagic, sizeof(kMagic));
  const std::uint32_t len = static_cast<std::uint32_t>(hdr.size());
  f.write(reinterpret_cast<const char*>(&len), sizeof(len));
  f.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
  write_params(f, net.weights, net.biases);
  if (adam != nullptr) {
    write_params(f, adam->m.weights, adam->m.biases);
    write_params(f, adam->v.weights, adam->v.biases);
  }
  if (!f) throw DataError(DataError::Kind::io, "checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(DataError::Kind::io, "checkpoint: cannot open " + path);

  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError(DataError::Kind::bad_magic, "checkpoint: bad magic in " + path);

  std::uint32_t len = 0;
  f.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string hdr(len, '\0');
  f.read(hdr.data(), len);
  if (!f) throw DataError(DataError::Kind::truncated, "checkpoint: truncated header");

  Checkpoint ckpt;
  ckpt.header = nlohmann::json::parse(hdr, nullptr, false);
  if (ckpt.header.is_discarded())
    throw DataError(DataError::Kind::io, "checkpoint: unparsable header");

  const auto widths = ckpt.header.at("widths").get<std::vector<int>>();
  RngStream dummy(0);
  ckpt.net = Mlp::init(widths, dummy);
  read_params(f, ckpt.net.weights, ckpt.net.biases);

  if (!ckpt.header.at("adam").is_null()) {
    AdamState adam = AdamState::like(ckpt.net);
    const auto& ja = ckpt.header.at("adam");
    adam.lr = ja.at("lr").get<double>();
    adam.beta1 = ja.at("beta1").get<double>();
    adam.beta2 = ja.at("beta2").get<double>();
    adam.eps = ja.at("eps").get<double>();
    adam.step_count = ja.at("step").get<std::uint64_t>();
    read_params(f, adam.m.weights, adam.m.biases);
    read_params(f, adam.v.weights, adam.v.biases);
    ckpt.adam = std::move(adam);
  }
  return ckpt;
}

}  // namespace fisor
