#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "mcnsfv/mc.hpp"

namespace mcnsfv {

inline constexpr std::uint32_t kFvfVersion = 1;
inline constexpr int kManifestVersion = 1;
inline constexpr const char* kManifestName = "manifest.json";

struct FvfHeader {
    std::uint32_t version = kFvfVersion;
    std::uint32_t d = 0;
    std::uint32_t n = 0;
    std::uint32_t components = 0;
};

/// "FVF1", version, d, n, components (u32 LE), then the values as f64 LE,
/// cell by cell with the components of a cell adjacent.
std::string encode_fvf(const Field& f);
/// Throws FormatError on bad magic, version or length.
FvfHeader read_fvf_header(std::string_view bytes);
/// Throws MeshMismatch when the header disagrees with `mesh` or `components`.
Field decode_fvf(std::string_view bytes, const MeshPtr& mesh, int components);

std::uint32_t crc32(std::string_view bytes);
/// crc32 as 8 lowercase hex digits.
std::string checksum_hex(std::string_view bytes);

/// Writes to a temporary sibling, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

/// Payloads first, manifest last; a stale manifest is removed before any payload
/// is touched.
void save_ensemble(const Ensemble& ens, const std::filesystem::path& dir);
/// Verifies format version, config hash, mesh size and every checksum.
Ensemble load_ensemble(const std::filesystem::path& dir, int expected_n);

void save_reference(const ReferenceStats& ref, const std::filesystem::path& dir);
ReferenceStats load_reference(const std::filesystem::path& dir, int expected_n);

} // namespace mcnsfv
