#include "re2re/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "re2re/config_io.hpp"
#include "re2re/error.hpp"

namespace re2re {

namespace {

constexpr char kMagic[8] = {'R', 'E', '2', 'R', 'E', 'C', 'K', 'P'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_doubles(std::string& out, const std::vector<double>& values) {
  for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::filesystem::path& path) : bytes_(bytes), path_(path) {}

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<unsigned char>(bytes_[pos_ + i])} << (8 * i);
    pos_ += 8;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<unsigned char>(bytes_[pos_ + i])} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> doubles(std::size_t n) {
    if (n > (bytes_.size() - pos_) / 8) throw IoError("'" + path_.string() + "': truncated checkpoint");
    std::vector<double> out(n);
    for (auto& v : out) v = std::bit_cast<double>(u64());
    return out;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError("'" + path_.string() + "': truncated checkpoint");
  }
  const std::string& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  nlohmann::json header;
  header["model"] = to_json(checkpoint.params.config());
  header["rng_state"] = checkpoint.rng_state;
  header["label"] = checkpoint.label;
  header["num_params"] = checkpoint.params.size();
  header["has_optimizer"] = checkpoint.optimizer.has_value();
  if (checkpoint.optimizer) header["optimizer_steps"] = checkpoint.optimizer->steps;
  const std::string head = header.dump();

  std::string out(kMagic, sizeof kMagic);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((kCheckpointVersion >> (8 * i)) & 0xff));
  put_u64(out, head.size());
  out += head;
  put_doubles(out, checkpoint.params.values());
  if (checkpoint.optimizer) {
    require(checkpoint.optimizer->first.size() == checkpoint.params.size() &&
                checkpoint.optimizer->second.size() == checkpoint.params.size(),
            "checkpoint optimizer moments do not match the parameter count");
    put_doubles(out, checkpoint.optimizer->first);
    put_doubles(out, checkpoint.optimizer->second);
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open '" + path.string() + "' for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open checkpoint '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  Reader in(bytes, path);
  if (in.text(sizeof kMagic) != std::string(kMagic, sizeof kMagic))
    throw IoError("'" + path.string() + "' is not a checkpoint");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion)
    throw ValidationError("'" + path.string() + "': checkpoint version " + std::to_string(version) +
                          " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  const std::uint64_t head_len = in.u64();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.text(head_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + path.string() + "': corrupt checkpoint header: " + e.what());
  }
  Checkpoint ck;
  const SeparatorConfig config = separator_config_from_json(header.at("model"));
  const auto count = header.at("num_params").get<std::size_t>();
  ck.params = ParamVector(config, in.doubles(count));
  ck.rng_state = header.value("rng_state", "");
  ck.label = header.value("label", "");
  if (header.value("has_optimizer", false)) {
    AdamMoments m;
    m.steps = header.at("optimizer_steps").get<std::uint64_t>();
    m.first = in.doubles(count);
    m.second = in.doubles(count);
    ck.optimizer = std::move(m);
  }
  if (!in.done()) throw IoError("'" + path.string() + "': trailing bytes after checkpoint payload");
  return ck;
}

}  // namespace re2re
