#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "bcr/apps.hpp"
#include "bcr/bcrnet.hpp"
#include "bcr/nsform.hpp"
#include "bcr/tensor.hpp"
#include "bcr/train.hpp"

namespace bcr::persist {

// TensorFile: "BCRT", version u8 = 1, dtype u8 = 0 (f64 LE), rank u8,
// reserved u8, rank x u64 LE extents, then the payload row-major.
//
// Container: "BCRC", version u8 = 1, three reserved bytes, u64 LE manifest
// length, the JSON manifest, then the concatenated entry blobs. The manifest
// holds {"kind", "config", "entries": [{"name", "offset", "length",
// "crc32c"}]} with offsets relative to the first blob; every blob is a
// TensorFile. Unknown manifest fields are ignored, unknown kinds rejected.

inline constexpr std::uint8_t kFormatVersion = 1;

/// CRC-32C (Castagnoli).
std::uint32_t crc32c(std::span<const std::uint8_t> bytes);

struct RawTensor {
  std::vector<std::uint64_t> extents;
  std::vector<double> data;

  friend bool operator==(const RawTensor&, const RawTensor&) = default;
};

std::vector<std::uint8_t> encode_tensor(const RawTensor& t);
RawTensor decode_tensor(std::span<const std::uint8_t> bytes, const std::string& what);

RawTensor to_raw(const Tensor& t);
RawTensor to_raw(const Eigen::MatrixXd& m);
Eigen::MatrixXd to_matrix(const RawTensor& t, const std::string& what);

struct Entry {
  std::string name;
  RawTensor tensor;
};

struct Container {
  std::string kind;
  nlohmann::json config = nlohmann::json::object();
  std::vector<Entry> entries;

  const RawTensor& get(const std::string& name) const;
};

std::vector<std::uint8_t> encode_container(const Container& c);
/// Throws IoError on malformed input and IntegrityError on checksum failure.
Container decode_container(std::span<const std::uint8_t> bytes);

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

void write_container(const std::filesystem::path& path, const Container& c);
/// Reads a container and checks its kind.
Container read_container(const std::filesystem::path& path, const std::string& expected_kind);

/// Tensors are stored as a "tensor" container; bare TensorFiles are also read.
void write_tensor(const std::filesystem::path& path, const RawTensor& t);
RawTensor read_tensor(const std::filesystem::path& path);

nlohmann::json config_to_json(const bcrnet::NetConfig& cfg);
bcrnet::NetConfig config_from_json(const nlohmann::json& j);
nlohmann::json descriptor_to_json(const apps::DatasetDescriptor& d);
apps::DatasetDescriptor descriptor_from_json(const nlohmann::json& j);

Container dataset_container(const apps::Dataset& d);
apps::Dataset dataset_from_container(const Container& c);
void write_dataset(const std::filesystem::path& path, const apps::Dataset& d);
apps::Dataset read_dataset(const std::filesystem::path& path);

Container nsform_container(const nsform::NonstandardForm& ns);
nsform::NonstandardForm nsform_from_container(const Container& c);
void write_nsform(const std::filesystem::path& path, const nsform::NonstandardForm& ns);
nsform::NonstandardForm read_nsform(const std::filesystem::path& path);

/// A trained model: network config, layer list in evaluation order, weights,
/// standardization, plus free-form metadata.
Container checkpoint_container(const train::Model& m, const nlohmann::json& extra = {});
train::Model model_from_container(const Container& c);
void write_checkpoint(const std::filesystem::path& path, const train::Model& m,
                      const nlohmann::json& extra = {});
train::Model read_checkpoint(const std::filesystem::path& path);

}  // namespace bcr::persist
