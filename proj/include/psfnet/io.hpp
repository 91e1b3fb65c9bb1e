#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "psfnet/calibration.hpp"
#include "psfnet/cascade.hpp"
#include "psfnet/simulate.hpp"
#include "psfnet/training.hpp"

namespace psfnet::io {

namespace fs = std::filesystem;

// CXT1 container: "CXT1", u8 dtype, u8 ndim, ndim x u64 extents, payload.
// All integers and floats are little-endian; values are stored as f32.
enum class CxtDtype : std::uint8_t { kComplex32 = 0, kReal32 = 1, kMask8 = 2 };

struct CxtHeader {
  CxtDtype dtype = CxtDtype::kReal32;
  Shape shape;
};

std::vector<std::uint8_t> encode_cxt(const ComplexTensor& t);
std::vector<std::uint8_t> encode_cxt(const RealTensor& t);
std::vector<std::uint8_t> encode_cxt(const MaskTensor& t);

// Parses and checks the header against the byte count. Throws IoError on a bad
// magic, unknown dtype, truncated or over-long payload.
CxtHeader decode_cxt_header(const std::vector<std::uint8_t>& bytes);
ComplexTensor decode_cxt_complex(const std::vector<std::uint8_t>& bytes);
RealTensor decode_cxt_real(const std::vector<std::uint8_t>& bytes);
MaskTensor decode_cxt_mask(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_bytes(const fs::path& path);
void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes);
std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

void write_cxt(const fs::path& path, const ComplexTensor& t);
void write_cxt(const fs::path& path, const RealTensor& t);
void write_cxt(const fs::path& path, const MaskTensor& t);
ComplexTensor read_cxt_complex(const fs::path& path);
RealTensor read_cxt_real(const fs::path& path);
MaskTensor read_cxt_mask(const fs::path& path);

// Dataset directory: manifest.txt plus <id>_{truth,maps,full_ksp,mask,und_ksp}.cxt
// and, for split masks, <id>_{dc_mask,loss_mask}.cxt.
inline constexpr const char* kDatasetManifest = "manifest.txt";
void write_dataset(const fs::path& dir, const std::vector<Scan>& scans);
std::vector<Scan> read_dataset(const fs::path& dir);

// SS kernel as <stem>.cxt plus a <stem>.txt header with kappa and w.
void write_kernel(const fs::path& stem, const SSKernel& kernel);
SSKernel read_kernel(const fs::path& stem);

struct CheckpointMeta {
  ModelKind model = ModelKind::kPsfnet;
  std::uint64_t seed = 0;
  std::size_t kernel_size = 9;
  double kappa = 1e-2;
  bool final_dc = false;
};

// Checkpoint directory: checkpoint.txt manifest plus one CXT file per layer
// weight and bias and one each for eta and gamma.
inline constexpr const char* kCheckpointManifest = "checkpoint.txt";
void write_checkpoint(const fs::path& dir, const ModelParams& params, const CheckpointMeta& meta);
ModelParams read_checkpoint(const fs::path& dir, CheckpointMeta* meta = nullptr);

inline constexpr const char* kHistoryHeader = "epoch,step,loss";
std::string history_csv(const std::vector<HistoryEntry>& history);

// 8-bit binary PGM scaled so that max(img) maps to 255.
std::string encode_pgm(const RealTensor& img);
void write_pgm(const fs::path& path, const RealTensor& img);

// Splits "a,b,c" into trimmed non-empty fields.
std::vector<std::string> split_list(const std::string& s);

}  // namespace psfnet::io
