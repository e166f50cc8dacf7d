#pragma once

#include "pwinv/forward.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pwinv {

/// `kind` is "missing-artifact" or "format".
struct IOError : std::runtime_error {
  std::string kind;
  IOError(std::string k, const std::string& msg)
      : std::runtime_error(k + ": " + msg), kind(std::move(k)) {}
};

std::string sha256_hex(std::string_view bytes);
const char* code_version();

/// {"scenario_hash": hash, "code_version": ...}
nlohmann::json artifact_stamp(const std::string& scenario_hash);

/// Dataset container, format version 1:
///   8 bytes  "PWINVDS1"
///   8 bytes  header length L (uint64, little endian)
///   L bytes  JSON header: grid_n, h, dt, steps, half_width, area, nodes,
///            eta_final, scenario_hash, code_version, node_fields
///   nodes x 8 float64   node table (in, out, axis, sign, x, y, z, sigma_face)
///   (steps+1) x nodes x 2 float64   frames of (u, flux)
/// All numbers little endian.
void write_dataset(const BoundaryDataset& data, const std::filesystem::path& file);
BoundaryDataset read_dataset(const std::filesystem::path& file);
/// frame, t, node, axis, sign, x, y, z, u, flux
void export_dataset_csv(const BoundaryDataset& data, const std::filesystem::path& file);

/// Sidecar field: "PWINVFD1", header length, JSON header (with "size"), float64 values.
void write_field(const std::filesystem::path& file, const Eigen::ArrayXd& values,
                 nlohmann::json header);
Eigen::ArrayXd read_field(const std::filesystem::path& file, nlohmann::json* header = nullptr);

void write_text(const std::filesystem::path& file, const std::string& text);
std::string read_text(const std::filesystem::path& file);
void write_json(const std::filesystem::path& file, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& file);

}  // namespace pwinv
