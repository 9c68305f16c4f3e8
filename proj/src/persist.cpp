#include "bcr/persist.hpp"

#include <algorithm>
#include <boost/crc.hpp>
#include <cstring>
#include <fstream>

#include "bcr/error.hpp"

namespace bcr::persist {

using nlohmann::json;

namespace {

constexpr char kTensorMagic[4] = {'B', 'C', 'R', 'T'};
constexpr char kContainerMagic[4] = {'B', 'C', 'R', 'C'};
constexpr std::size_t kContainerHeader = 16;

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &d, sizeof bits);
  put_u64(out, bits);
}

double get_f64(const std::uint8_t* p) {
  const std::uint64_t bits = get_u64(p);
  double d = 0.0;
  std::memcpy(&d, &bits, sizeof d);
  return d;
}

const std::vector<std::string>& known_kinds() {
  static const std::vector<std::string> kinds{"tensor", "dataset", "nsform", "checkpoint"};
  return kinds;
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw IoError(where + ": manifest field '" + key + "' is missing");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw IoError(where + ": manifest field '" + key + "' has the wrong type");
  }
}

RawTensor samples_tensor(const std::vector<apps::TaskSample>& s, bool target, std::size_t width) {
  RawTensor t;
  t.extents = {s.size(), width};
  t.data.reserve(s.size() * width);
  for (const auto& x : s) {
    const auto& v = target ? x.target : x.input;
    if (v.size() != width) throw ValidationError("dataset: samples have inconsistent lengths");
    t.data.insert(t.data.end(), v.begin(), v.end());
  }
  return t;
}

std::vector<apps::TaskSample> samples_from(const RawTensor& in, const RawTensor& out,
                                           std::size_t count, std::size_t width) {
  if (in.extents != std::vector<std::uint64_t>{count, width} || out.extents != in.extents) {
    throw IoError("dataset: sample payload shape disagrees with the descriptor");
  }
  std::vector<apps::TaskSample> s(count);
  for (std::size_t i = 0; i < count; ++i) {
    s[i].input.assign(in.data.begin() + static_cast<std::ptrdiff_t>(i * width),
                      in.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * width));
    s[i].target.assign(out.data.begin() + static_cast<std::ptrdiff_t>(i * width),
                       out.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * width));
  }
  return s;
}

}  // namespace

std::uint32_t crc32c(std::span<const std::uint8_t> bytes) {
  boost::crc_optimal<32, 0x1EDC6F41, 0xFFFFFFFF, 0xFFFFFFFF, true, true> crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

std::vector<std::uint8_t> encode_tensor(const RawTensor& t) {
  if (t.extents.empty() || t.extents.size() > 255) throw ValidationError("tensor: rank must lie in 1..255");
  std::uint64_t count = 1;
  for (std::uint64_t e : t.extents) {
    if (e == 0) throw ValidationError("tensor: empty extents cannot be written");
    count *= e;
  }
  if (count != t.data.size()) throw ValidationError("tensor: payload length does not match extents");
  std::vector<std::uint8_t> out(kTensorMagic, kTensorMagic + 4);
  out.push_back(kFormatVersion);
  out.push_back(0);
  out.push_back(static_cast<std::uint8_t>(t.extents.size()));
  out.push_back(0);
  for (std::uint64_t e : t.extents) put_u64(out, e);
  out.reserve(out.size() + 8 * t.data.size());
  for (double d : t.data) put_f64(out, d);
  return out;
}

RawTensor decode_tensor(std::span<const std::uint8_t> b, const std::string& what) {
  if (b.size() < 8 || std::memcmp(b.data(), kTensorMagic, 4) != 0) {
    throw IoError(what + ": not a tensor (bad magic)");
  }
  if (b[4] != kFormatVersion) {
    throw IoError(what + ": unsupported tensor format version " + std::to_string(b[4]));
  }
  if (b[5] != 0) throw IoError(what + ": unsupported dtype code " + std::to_string(b[5]));
  const std::size_t rank = b[6];
  if (rank == 0) throw IoError(what + ": rank 0 tensor");
  if (b.size() < 8 + 8 * rank) throw IoError(what + ": truncated tensor header");
  RawTensor t;
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    const std::uint64_t e = get_u64(b.data() + 8 + 8 * i);
    if (e == 0) throw IoError(what + ": zero extent");
    if (count > (std::uint64_t{1} << 40) / e) throw IoError(what + ": extents too large");
    count *= e;
    t.extents.push_back(e);
  }
  const std::size_t start = 8 + 8 * rank;
  if (b.size() - start < 8 * count) {
    throw IoError(what + ": truncated payload, " + std::to_string(b.size() - start) + " bytes of " +
                  std::to_string(8 * count));
  }
  if (b.size() - start != 8 * count) {
    throw IoError(what + ": payload is " + std::to_string(b.size() - start) + " bytes, expected " +
                  std::to_string(8 * count));
  }
  t.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) t.data[i] = get_f64(b.data() + start + 8 * i);
  return t;
}

RawTensor to_raw(const Tensor& t) {
  RawTensor r;
  for (int e : t.extents()) r.extents.push_back(static_cast<std::uint64_t>(e));
  if (t.channels() != 1) r.extents.push_back(static_cast<std::uint64_t>(t.channels()));
  r.data = t.values();
  return r;
}

RawTensor to_raw(const Eigen::MatrixXd& m) {
  RawTensor r;
  r.extents = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  r.data.resize(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      r.data[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
    }
  }
  return r;
}

Eigen::MatrixXd to_matrix(const RawTensor& t, const std::string& what) {
  if (t.extents.size() != 2) throw ValidationError(what + ": expected a rank-2 tensor");
  const auto rows = static_cast<Eigen::Index>(t.extents[0]);
  const auto cols = static_cast<Eigen::Index>(t.extents[1]);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = t.data[static_cast<std::size_t>(i * cols + j)];
  }
  return m;
}

const RawTensor& Container::get(const std::string& name) const {
  for (const Entry& e : entries) {
    if (e.name == name) return e.tensor;
  }
  throw IoError(kind + " file: entry '" + name + "' is missing");
}

std::vector<std::uint8_t> encode_container(const Container& c) {
  if (std::find(known_kinds().begin(), known_kinds().end(), c.kind) == known_kinds().end()) {
    throw ValidationError("unknown artifact kind '" + c.kind + "'");
  }
  std::vector<std::vector<std::uint8_t>> blobs;
  json entries = json::array();
  std::uint64_t offset = 0;
  for (const Entry& e : c.entries) {
    blobs.push_back(encode_tensor(e.tensor));
    const auto& blob = blobs.back();
    entries.push_back({{"name", e.name},
                       {"offset", offset},
                       {"length", blob.size()},
                       {"crc32c", crc32c(blob)}});
    offset += blob.size();
  }
  const json manifest = {{"kind", c.kind}, {"config", c.config}, {"entries", entries}};
  const std::string text = manifest.dump();
  std::vector<std::uint8_t> out(kContainerMagic, kContainerMagic + 4);
  out.push_back(kFormatVersion);
  out.push_back(0);
  out.push_back(0);
  out.push_back(0);
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& blob : blobs) out.insert(out.end(), blob.begin(), blob.end());
  return out;
}

Container decode_container(std::span<const std::uint8_t> b) {
  if (b.size() < kContainerHeader || std::memcmp(b.data(), kContainerMagic, 4) != 0) {
    throw IoError("not a container file (bad magic)");
  }
  if (b[4] != kFormatVersion) {
    throw IoError("unsupported container format version " + std::to_string(b[4]));
  }
  const std::uint64_t mlen = get_u64(b.data() + 8);
  if (mlen > b.size() - kContainerHeader) throw IoError("truncated container manifest");
  json manifest;
  try {
    manifest = json::parse(b.begin() + kContainerHeader,
                           b.begin() + static_cast<std::ptrdiff_t>(kContainerHeader + mlen));
  } catch (const json::exception& e) {
    throw IoError(std::string("container manifest is not valid JSON: ") + e.what());
  }
  Container c;
  c.kind = field<std::string>(manifest, "kind", "container");
  if (std::find(known_kinds().begin(), known_kinds().end(), c.kind) == known_kinds().end()) {
    throw IoError("unknown artifact kind '" + c.kind + "'");
  }
  if (manifest.contains("config")) c.config = manifest.at("config");
  if (!manifest.contains("entries") || !manifest.at("entries").is_array()) {
    throw IoError("container manifest has no entry list");
  }
  const std::size_t base = kContainerHeader + mlen;
  const std::size_t payload = b.size() - base;
  for (const json& e : manifest.at("entries")) {
    const auto name = field<std::string>(e, "name", "entry");
    const auto offset = field<std::uint64_t>(e, "offset", name);
    const auto length = field<std::uint64_t>(e, "length", name);
    const auto crc = field<std::uint32_t>(e, "crc32c", name);
    if (offset > payload || length > payload - offset) {
      throw IoError("entry '" + name + "' runs past the end of the file (truncated payload)");
    }
    const auto blob = b.subspan(base + offset, length);
    if (crc32c(blob) != crc) throw IntegrityError("checksum mismatch in entry '" + name + "'");
    c.entries.push_back(Entry{name, decode_tensor(blob, "entry '" + name + "'")});
  }
  return c;
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_container(const std::filesystem::path& path, const Container& c) {
  write_bytes(path, encode_container(c));
}

Container read_container(const std::filesystem::path& path, const std::string& expected_kind) {
  Container c = decode_container(read_bytes(path));
  if (c.kind != expected_kind) {
    throw IoError("'" + path.string() + "' holds a " + c.kind + ", expected a " + expected_kind);
  }
  return c;
}

void write_tensor(const std::filesystem::path& path, const RawTensor& t) {
  Container c;
  c.kind = "tensor";
  c.entries.push_back({"tensor", t});
  write_container(path, c);
}

RawTensor read_tensor(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_bytes(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kTensorMagic, 4) == 0) {
    return decode_tensor(bytes, path.string());
  }
  Container c = decode_container(bytes);
  if (c.kind != "tensor") throw IoError("'" + path.string() + "' holds a " + c.kind + ", expected a tensor");
  return c.get("tensor");
}

json config_to_json(const bcrnet::NetConfig& cfg) {
  return {{"dim", cfg.dim},
          {"p", cfg.p},
          {"L", cfg.L},
          {"L0", cfg.L0},
          {"n_b", cfg.n_b},
          {"alpha", cfg.alpha},
          {"K", cfg.K},
          {"mode", bcrnet::to_string(cfg.mode)},
          {"activation", layers::to_string(cfg.activation)},
          {"transform_init", bcrnet::to_string(cfg.transform_init)},
          {"transform_trainable", cfg.transform_trainable}};
}

bcrnet::NetConfig config_from_json(const json& j) {
  const std::string w = "network config";
  bcrnet::NetConfig cfg;
  cfg.dim = field<int>(j, "dim", w);
  cfg.p = field<int>(j, "p", w);
  cfg.L = field<int>(j, "L", w);
  cfg.L0 = field<int>(j, "L0", w);
  cfg.n_b = field<int>(j, "n_b", w);
  cfg.alpha = field<int>(j, "alpha", w);
  cfg.K = field<int>(j, "K", w);
  try {
    cfg.mode = bcrnet::parse_mode(field<std::string>(j, "mode", w));
    cfg.activation = layers::parse_activation(field<std::string>(j, "activation", w));
    cfg.transform_init = bcrnet::parse_transform_init(field<std::string>(j, "transform_init", w));
  } catch (const ValidationError& e) {
    throw IoError(w + ": " + e.what());
  }
  cfg.transform_trainable = field<bool>(j, "transform_trainable", w);
  return cfg;
}

json descriptor_to_json(const apps::DatasetDescriptor& d) {
  return {{"task", apps::to_string(d.task)}, {"dim", d.dim},         {"n", d.n},
          {"coarse", d.coarse},              {"n_train", d.n_train}, {"n_test", d.n_test},
          {"seed", d.seed}};
}

apps::DatasetDescriptor descriptor_from_json(const json& j) {
  const std::string w = "dataset descriptor";
  apps::DatasetDescriptor d;
  try {
    d.task = apps::parse_task(field<std::string>(j, "task", w));
  } catch (const ValidationError& e) {
    throw IoError(w + ": " + e.what());
  }
  d.dim = field<int>(j, "dim", w);
  d.n = field<int>(j, "n", w);
  d.coarse = field<int>(j, "coarse", w);
  d.n_train = field<int>(j, "n_train", w);
  d.n_test = field<int>(j, "n_test", w);
  d.seed = field<std::uint64_t>(j, "seed", w);
  return d;
}

Container dataset_container(const apps::Dataset& d) {
  const auto& desc = d.descriptor;
  if (static_cast<int>(d.train.size()) != desc.n_train || static_cast<int>(d.test.size()) != desc.n_test) {
    throw ValidationError("dataset: split sizes disagree with the descriptor");
  }
  const std::size_t width = desc.dim == 1 ? static_cast<std::size_t>(desc.n)
                                          : static_cast<std::size_t>(desc.n) * desc.n;
  Container c;
  c.kind = "dataset";
  c.config = descriptor_to_json(desc);
  if (!d.train.empty()) {
    c.entries.push_back({"train.input", samples_tensor(d.train, false, width)});
    c.entries.push_back({"train.target", samples_tensor(d.train, true, width)});
  }
  if (!d.test.empty()) {
    c.entries.push_back({"test.input", samples_tensor(d.test, false, width)});
    c.entries.push_back({"test.target", samples_tensor(d.test, true, width)});
  }
  return c;
}

apps::Dataset dataset_from_container(const Container& c) {
  apps::Dataset d;
  d.descriptor = descriptor_from_json(c.config);
  const auto& desc = d.descriptor;
  if (desc.dim != 1 && desc.dim != 2) throw IoError("dataset descriptor: bad dim");
  if (desc.n < 1 || desc.n_train < 0 || desc.n_test < 0) throw IoError("dataset descriptor: bad sizes");
  const std::size_t width = desc.dim == 1 ? static_cast<std::size_t>(desc.n)
                                          : static_cast<std::size_t>(desc.n) * desc.n;
  if (desc.n_train > 0) {
    d.train = samples_from(c.get("train.input"), c.get("train.target"),
                           static_cast<std::size_t>(desc.n_train), width);
  }
  if (desc.n_test > 0) {
    d.test = samples_from(c.get("test.input"), c.get("test.target"),
                          static_cast<std::size_t>(desc.n_test), width);
  }
  return d;
}

void write_dataset(const std::filesystem::path& path, const apps::Dataset& d) {
  write_container(path, dataset_container(d));
}

apps::Dataset read_dataset(const std::filesystem::path& path) {
  return dataset_from_container(read_container(path, "dataset"));
}

Container nsform_container(const nsform::NonstandardForm& ns) {
  Container c;
  c.kind = "nsform";
  c.config = {{"dim", ns.dim},
              {"L", ns.L},
              {"L0", ns.L0},
              {"p", ns.p},
              {"n_b", ns.n_b},
              {"block_order", ns.dim == 1 ? "psi,phi rows x psi,phi cols; D1..D3 row-major, D4 = 0"
                                          : "psipsi,psiphi,phipsi,phiphi rows x cols; D1..D15 "
                                            "row-major, (4,4) is the coarse operator"},
              {"band_layout", "[position][offset slot], offsets -b..b per axis, b = (n_b-1)/2"}};
  for (const nsform::NsLevel& lv : ns.levels) {
    const std::string prefix = "level." + std::to_string(lv.level);
    for (std::size_t j = 0; j < lv.blocks.size(); ++j) {
      RawTensor t;
      t.extents = {ns.positions(lv.level), ns.window()};
      t.data = lv.blocks[j];
      c.entries.push_back({prefix + ".D" + std::to_string(j + 1), std::move(t)});
    }
    RawTensor e;
    e.extents = {2, lv.blocks.size()};
    e.data = lv.kept_energy;
    e.data.insert(e.data.end(), lv.dropped_energy.begin(), lv.dropped_energy.end());
    c.entries.push_back({prefix + ".energy", std::move(e)});
  }
  c.entries.push_back({"top", to_raw(ns.top)});
  return c;
}

nsform::NonstandardForm nsform_from_container(const Container& c) {
  const std::string w = "nsform header";
  nsform::NonstandardForm ns;
  ns.dim = field<int>(c.config, "dim", w);
  ns.L = field<int>(c.config, "L", w);
  ns.L0 = field<int>(c.config, "L0", w);
  ns.p = field<int>(c.config, "p", w);
  ns.n_b = field<int>(c.config, "n_b", w);
  if ((ns.dim != 1 && ns.dim != 2) || ns.L0 < 0 || ns.L <= ns.L0 || ns.L * ns.dim > 24 || ns.n_b < 1 ||
      ns.p < 1 || ns.p > 6) {
    throw IoError("nsform header: inconsistent values");
  }
  const std::size_t blocks = static_cast<std::size_t>(ns.block_count());
  for (int level = ns.L0; level < ns.L; ++level) {
    nsform::NsLevel lv;
    lv.level = level;
    const std::string prefix = "level." + std::to_string(level);
    for (std::size_t j = 0; j < blocks; ++j) {
      const RawTensor& t = c.get(prefix + ".D" + std::to_string(j + 1));
      if (t.extents != std::vector<std::uint64_t>{ns.positions(level), ns.window()}) {
        throw IoError("nsform: block " + prefix + ".D" + std::to_string(j + 1) + " has the wrong shape");
      }
      lv.blocks.push_back(t.data);
    }
    const RawTensor& e = c.get(prefix + ".energy");
    if (e.extents != std::vector<std::uint64_t>{2, blocks}) throw IoError("nsform: bad energy table");
    lv.kept_energy.assign(e.data.begin(), e.data.begin() + static_cast<std::ptrdiff_t>(blocks));
    lv.dropped_energy.assign(e.data.begin() + static_cast<std::ptrdiff_t>(blocks), e.data.end());
    ns.levels.push_back(std::move(lv));
  }
  const RawTensor& top = c.get("top");
  const std::uint64_t side = ns.positions(ns.L0);
  if (top.extents != std::vector<std::uint64_t>{side, side}) throw IoError("nsform: top block has the wrong shape");
  ns.top = to_matrix(top, "top");
  return ns;
}

void write_nsform(const std::filesystem::path& path, const nsform::NonstandardForm& ns) {
  write_container(path, nsform_container(ns));
}

nsform::NonstandardForm read_nsform(const std::filesystem::path& path) {
  return nsform_from_container(read_container(path, "nsform"));
}

Container checkpoint_container(const train::Model& m, const json& extra) {
  Container c;
  c.kind = "checkpoint";
  json layer_list = json::array();
  for (const auto& l : m.net.layers) {
    layer_list.push_back({{"name", l.name},
                          {"kind", layers::to_string(l.spec.kind)},
                          {"in_channels", l.spec.in_channels},
                          {"out_channels", l.spec.out_channels},
                          {"window", l.spec.window},
                          {"stride", l.spec.stride},
                          {"offset", l.spec.offset},
                          {"activation", layers::to_string(l.spec.activation)},
                          {"trainable", l.trainable}});
    RawTensor w;
    w.extents = {l.spec.weights.size()};
    w.data = l.spec.weights;
    RawTensor b;
    b.extents = {l.spec.bias.size()};
    b.data = l.spec.bias;
    c.entries.push_back({l.name + ".w", std::move(w)});
    c.entries.push_back({l.name + ".b", std::move(b)});
  }
  c.config = {{"network", config_to_json(m.net.config)},
              {"layers", layer_list},
              {"standardization",
               {{"in_mean", m.norm.in_mean},
                {"in_scale", m.norm.in_scale},
                {"out_mean", m.norm.out_mean},
                {"out_scale", m.norm.out_scale}}},
              {"extra", extra.is_null() ? json::object() : extra}};
  return c;
}

train::Model model_from_container(const Container& c) {
  if (!c.config.contains("network")) throw IoError("checkpoint: network config missing");
  const bcrnet::NetConfig cfg = config_from_json(c.config.at("network"));
  train::Model m;
  try {
    m.net = bcrnet::build_structure(cfg);
  } catch (const ValidationError& e) {
    throw IoError(std::string("checkpoint: invalid network config: ") + e.what());
  }
  const json layer_list = c.config.value("layers", json::array());
  if (!layer_list.is_array() || layer_list.size() != m.net.layers.size()) {
    throw IoError("checkpoint: layer list does not match the network config");
  }
  for (std::size_t i = 0; i < m.net.layers.size(); ++i) {
    auto& l = m.net.layers[i];
    if (field<std::string>(layer_list[i], "name", "checkpoint layer") != l.name ||
        field<std::string>(layer_list[i], "kind", l.name) != layers::to_string(l.spec.kind)) {
      throw IoError("checkpoint: layer " + std::to_string(i) + " does not match the network config");
    }
    l.trainable = layer_list[i].value("trainable", l.trainable);
    const RawTensor& w = c.get(l.name + ".w");
    const RawTensor& b = c.get(l.name + ".b");
    if (w.data.size() != l.spec.weights.size() || b.data.size() != l.spec.bias.size()) {
      throw IoError("checkpoint: parameter size mismatch for layer '" + l.name + "'");
    }
    l.spec.weights = w.data;
    l.spec.bias = b.data;
  }
  const json s = c.config.value("standardization", json::object());
  m.norm.in_mean = field<double>(s, "in_mean", "standardization");
  m.norm.in_scale = field<double>(s, "in_scale", "standardization");
  m.norm.out_mean = field<double>(s, "out_mean", "standardization");
  m.norm.out_scale = field<double>(s, "out_scale", "standardization");
  return m;
}

void write_checkpoint(const std::filesystem::path& path, const train::Model& m, const json& extra) {
  write_container(path, checkpoint_container(m, extra));
}

train::Model read_checkpoint(const std::filesystem::path& path) {
  return model_from_container(read_container(path, "checkpoint"));
}

}  // namespace bcr::persist
