#include "psfnet/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "psfnet/config.hpp"

namespace psfnet::io {

namespace {

constexpr char kMagic[4] = {'C', 'X', 'T', '1'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
  return v;
}

double get_f32(const std::uint8_t* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= std::uint32_t(p[i]) << (8 * i);
  return static_cast<double>(std::bit_cast<float>(bits));
}

std::size_t dtype_size(CxtDtype d) {
  switch (d) {
    case CxtDtype::kComplex32: return 8;
    case CxtDtype::kReal32: return 4;
    case CxtDtype::kMask8: return 1;
  }
  return 0;
}

std::vector<std::uint8_t> header_bytes(CxtDtype dtype, const Shape& shape) {
  if (shape.size() > 255) throw ShapeError("cxt: too many dimensions");
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(static_cast<std::uint8_t>(dtype));
  out.push_back(static_cast<std::uint8_t>(shape.size()));
  for (std::size_t e : shape) put_u64(out, e);
  return out;
}

std::size_t header_size(const Shape& shape) { return 6 + 8 * shape.size(); }

const std::uint8_t* payload_of(const std::vector<std::uint8_t>& bytes, CxtDtype expect,
                               CxtHeader& h) {
  h = decode_cxt_header(bytes);
  if (h.dtype != expect) {
    throw IoError("cxt: dtype " + std::to_string(int(h.dtype)) + " where " +
                  std::to_string(int(expect)) + " was expected");
  }
  return bytes.data() + header_size(h.shape);
}

}  // namespace

std::vector<std::uint8_t> encode_cxt(const ComplexTensor& t) {
  auto out = header_bytes(CxtDtype::kComplex32, t.shape());
  out.reserve(out.size() + 8 * t.size());
  for (const cplx& v : t.storage()) {
    put_f32(out, v.real());
    put_f32(out, v.imag());
  }
  return out;
}

std::vector<std::uint8_t> encode_cxt(const RealTensor& t) {
  auto out = header_bytes(CxtDtype::kReal32, t.shape());
  out.reserve(out.size() + 4 * t.size());
  for (double v : t.storage()) put_f32(out, v);
  return out;
}

std::vector<std::uint8_t> encode_cxt(const MaskTensor& t) {
  auto out = header_bytes(CxtDtype::kMask8, t.shape());
  for (std::uint8_t v : t.storage()) {
    if (v > 1) throw ShapeError("cxt: mask values must be 0 or 1");
    out.push_back(v);
  }
  return out;
}

CxtHeader decode_cxt_header(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw IoError("cxt: bad magic (not a CXT1 file)");
  }
  CxtHeader h;
  const std::uint8_t tag = bytes[4];
  if (tag > 2) throw IoError("cxt: unknown dtype tag " + std::to_string(tag));
  h.dtype = static_cast<CxtDtype>(tag);
  const std::size_t ndim = bytes[5];
  if (bytes.size() < 6 + 8 * ndim) throw IoError("cxt: truncated header");
  std::size_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    const std::uint64_t e = get_u64(bytes.data() + 6 + 8 * i);
    if (e != 0 && count > (std::uint64_t(1) << 40) / e) throw IoError("cxt: extents too large");
    count *= e;
    h.shape.push_back(e);
  }
  const std::size_t want = header_size(h.shape) + count * dtype_size(h.dtype);
  if (bytes.size() < want) throw IoError("cxt: truncated payload");
  if (bytes.size() > want) throw IoError("cxt: trailing bytes after payload");
  return h;
}

ComplexTensor decode_cxt_complex(const std::vector<std::uint8_t>& bytes) {
  CxtHeader h;
  const std::uint8_t* p = payload_of(bytes, CxtDtype::kComplex32, h);
  ComplexTensor t(h.shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = cplx(get_f32(p + 8 * i), get_f32(p + 8 * i + 4));
  return t;
}

RealTensor decode_cxt_real(const std::vector<std::uint8_t>& bytes) {
  CxtHeader h;
  const std::uint8_t* p = payload_of(bytes, CxtDtype::kReal32, h);
  RealTensor t(h.shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = get_f32(p + 4 * i);
  return t;
}

MaskTensor decode_cxt_mask(const std::vector<std::uint8_t>& bytes) {
  CxtHeader h;
  const std::uint8_t* p = payload_of(bytes, CxtDtype::kMask8, h);
  MaskTensor t(h.shape);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (p[i] > 1) throw IoError("cxt: mask payload holds a value other than 0 or 1");
    t[i] = p[i];
  }
  return t;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> out((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) throw IoError("read failed for '" + path.string() + "'");
  return out;
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot create '" + path.string() + "'");
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  const auto b = read_bytes(path);
  return std::string(b.begin(), b.end());
}

void write_text(const fs::path& path, const std::string& text) {
  write_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

void write_cxt(const fs::path& path, const ComplexTensor& t) { write_bytes(path, encode_cxt(t)); }
void write_cxt(const fs::path& path, const RealTensor& t) { write_bytes(path, encode_cxt(t)); }
void write_cxt(const fs::path& path, const MaskTensor& t) { write_bytes(path, encode_cxt(t)); }

namespace {

template <typename F>
auto with_path(const fs::path& path, F&& decode) {
  try {
    return decode(read_bytes(path));
  } catch (const IoError& e) {
    const std::string msg = e.what();
    if (msg.find(path.string()) != std::string::npos) throw;
    throw IoError(path.string() + ": " + msg);
  }
}

}  // namespace

ComplexTensor read_cxt_complex(const fs::path& path) {
  return with_path(path, [](const auto& b) { return decode_cxt_complex(b); });
}
RealTensor read_cxt_real(const fs::path& path) {
  return with_path(path, [](const auto& b) { return decode_cxt_real(b); });
}
MaskTensor read_cxt_mask(const fs::path& path) {
  return with_path(path, [](const auto& b) { return decode_cxt_mask(b); });
}

namespace {

using Fields = std::map<std::string, std::string>;

// "key=value key=value ..." tokens after a leading record tag.
Fields parse_fields(std::istringstream& in, const std::string& where) {
  Fields f;
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0) throw IoError(where + ": malformed field '" + tok + "'");
    f[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return f;
}

const std::string& field(const Fields& f, const std::string& key, const std::string& where) {
  const auto it = f.find(key);
  if (it == f.end()) throw IoError(where + ": missing field '" + key + "'");
  return it->second;
}

// Numeric fields in data files are I/O problems rather than user configuration.
template <typename F>
auto io_parse(F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw IoError(e.what());
  }
}

void require_shape(const Shape& got, const Shape& want, const std::string& what) {
  if (got != want) {
    throw IoError(what + ": shape " + shape_to_string(got) + " where " + shape_to_string(want) +
                  " was expected");
  }
}

}  // namespace

void write_dataset(const fs::path& dir, const std::vector<Scan>& scans) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  std::ostringstream m;
  m << "psfnet-dataset 1\n";
  for (const Scan& s : scans) {
    if (s.id.empty() || s.id.find_first_of(" \t\n=/") != std::string::npos) {
      throw ConfigError("scan id '" + s.id + "' is not a valid file stem");
    }
    const CalibWindow& c = s.mask.calib;
    m << "scan id=" << s.id << " coils=" << s.coils() << " height=" << s.height()
      << " width=" << s.width() << " accel=" << format_double(s.mask.accel_target)
      << " pattern=" << to_string(s.mask.pattern) << " seed=" << s.mask.seed
      << " calib=" << c.h0 << "," << c.w0 << "," << c.ch << "," << c.cw
      << " split=" << (s.mask.split ? 1 : 0) << "\n";
    write_cxt(dir / (s.id + "_truth.cxt"), s.truth_img);
    write_cxt(dir / (s.id + "_maps.cxt"), s.sens_maps);
    write_cxt(dir / (s.id + "_full_ksp.cxt"), s.full_ksp);
    write_cxt(dir / (s.id + "_mask.cxt"), s.mask.mask);
    write_cxt(dir / (s.id + "_und_ksp.cxt"), s.und_ksp);
    if (s.mask.split) {
      write_cxt(dir / (s.id + "_dc_mask.cxt"), s.mask.split->dc_mask);
      write_cxt(dir / (s.id + "_loss_mask.cxt"), s.mask.split->loss_mask);
    }
  }
  write_text(dir / kDatasetManifest, m.str());
}

std::vector<Scan> read_dataset(const fs::path& dir) {
  const fs::path manifest = dir / kDatasetManifest;
  std::istringstream text(read_text(manifest));
  std::string line;
  if (!std::getline(text, line) || line != "psfnet-dataset 1") {
    throw IoError(manifest.string() + ": not a dataset manifest");
  }
  std::vector<Scan> scans;
  std::size_t line_no = 1;
  while (std::getline(text, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = manifest.string() + ":" + std::to_string(line_no);
    std::istringstream in(line);
    std::string tag;
    in >> tag;
    if (tag != "scan") throw IoError(where + ": unexpected record '" + tag + "'");
    const Fields f = parse_fields(in, where);

    Scan s;
    s.id = field(f, "id", where);
    const auto num = [&](const std::string& k) {
      return io_parse([&] { return parse_uint(field(f, k, where), k); });
    };
    const std::size_t z = num("coils");
    const std::size_t h = num("height");
    const std::size_t w = num("width");
    s.mask.accel_target = io_parse([&] { return parse_double(field(f, "accel", where), "accel"); });
    s.mask.pattern = io_parse([&] { return parse_mask_pattern(field(f, "pattern", where)); });
    s.mask.seed = num("seed");
    {
      std::istringstream cs(field(f, "calib", where));
      std::string part;
      std::vector<std::size_t> v;
      while (std::getline(cs, part, ',')) v.push_back(io_parse([&] { return parse_uint(part, "calib"); }));
      if (v.size() != 4) throw IoError(where + ": calib needs h0,w0,ch,cw");
      s.mask.calib = {v[0], v[1], v[2], v[3]};
      if (v[0] + v[2] > h || v[1] + v[3] > w) throw IoError(where + ": calib window outside grid");
    }
    const bool split = io_parse([&] { return parse_bool(field(f, "split", where), "split"); });

    const fs::path base = dir / s.id;
    const Shape coil_shape{z, h, w};
    const Shape plane{h, w};
    s.truth_img = read_cxt_complex(base.string() + "_truth.cxt");
    s.sens_maps = read_cxt_complex(base.string() + "_maps.cxt");
    s.full_ksp = read_cxt_complex(base.string() + "_full_ksp.cxt");
    s.und_ksp = read_cxt_complex(base.string() + "_und_ksp.cxt");
    s.mask.mask = read_cxt_mask(base.string() + "_mask.cxt");
    require_shape(s.truth_img.shape(), coil_shape, s.id + " truth");
    require_shape(s.sens_maps.shape(), coil_shape, s.id + " maps");
    require_shape(s.full_ksp.shape(), coil_shape, s.id + " full_ksp");
    require_shape(s.und_ksp.shape(), coil_shape, s.id + " und_ksp");
    require_shape(s.mask.mask.shape(), plane, s.id + " mask");
    if (split) {
      MaskSplit sp{read_cxt_mask(base.string() + "_dc_mask.cxt"),
                   read_cxt_mask(base.string() + "_loss_mask.cxt")};
      require_shape(sp.dc_mask.shape(), plane, s.id + " dc_mask");
      require_shape(sp.loss_mask.shape(), plane, s.id + " loss_mask");
      s.mask.split = std::move(sp);
    }
    scans.push_back(std::move(s));
  }
  return scans;
}

void write_kernel(const fs::path& stem, const SSKernel& kernel) {
  write_cxt(stem.string() + ".cxt", kernel.weights);
  write_text(stem.string() + ".txt", "kappa=" + format_double(kernel.kappa) +
                                         "\nkernel_size=" + std::to_string(kernel.kernel_size) +
                                         "\n");
}

SSKernel read_kernel(const fs::path& stem) {
  SSKernel k;
  k.weights = read_cxt_complex(stem.string() + ".cxt");
  std::istringstream in(read_text(stem.string() + ".txt"));
  std::string line;
  Fields f;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) f[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const std::string where = stem.string() + ".txt";
  k.kappa = io_parse([&] { return parse_double(field(f, "kappa", where), "kappa"); });
  k.kernel_size = io_parse([&] { return parse_uint(field(f, "kernel_size", where), "kernel_size"); });
  const Shape& s = k.weights.shape();
  if (s.size() != 4 || s[0] != s[1] || s[2] != k.kernel_size || s[3] != k.kernel_size) {
    throw IoError(stem.string() + ": kernel shape does not match its header");
  }
  return k;
}

namespace {

std::string layer_file(std::size_t l, const char* what) {
  return "layer" + std::to_string(l) + "_" + what + ".cxt";
}

}  // namespace

void write_checkpoint(const fs::path& dir, const ModelParams& params, const CheckpointMeta& meta) {
  params.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  std::ostringstream m;
  m << "format=psfnet-checkpoint-1\n"
    << "model=" << to_string(meta.model) << "\n"
    << "coils=" << params.sg.coils << "\n"
    << "channels=" << params.sg.channels << "\n"
    << "cascades=" << params.cascades << "\n"
    << "seed=" << meta.seed << "\n"
    << "kernel_size=" << meta.kernel_size << "\n"
    << "kappa=" << format_double(meta.kappa) << "\n"
    << "final_dc=" << (meta.final_dc ? "true" : "false") << "\n"
    << "lambda_dc=" << format_double(params.lambda_dc) << "\n";
  for (std::size_t l = 0; l < nd::SGBlockParams::kLayers; ++l) {
    m << "layer" << l << ".weight=" << shape_to_string(params.sg.weights[l].shape()) << "\n";
    m << "layer" << l << ".bias=" << shape_to_string(params.sg.biases[l].shape()) << "\n";
    write_cxt(dir / layer_file(l, "weight"), params.sg.weights[l]);
    write_cxt(dir / layer_file(l, "bias"), params.sg.biases[l]);
  }
  write_cxt(dir / "eta.cxt", RealTensor({params.cascades}, params.eta));
  write_cxt(dir / "gamma.cxt", RealTensor({params.cascades}, params.gamma));
  write_text(dir / kCheckpointManifest, m.str());
}

ModelParams read_checkpoint(const fs::path& dir, CheckpointMeta* meta) {
  const fs::path manifest = dir / kCheckpointManifest;
  if (!fs::exists(manifest)) {
    throw ConfigError("checkpoint not found: '" + manifest.string() + "' does not exist");
  }
  std::istringstream in(read_text(manifest));
  Fields f;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) f[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const std::string where = manifest.string();
  if (field(f, "format", where) != "psfnet-checkpoint-1") {
    throw IoError(where + ": unsupported checkpoint format");
  }
  const auto num = [&](const std::string& k) {
    return io_parse([&] { return parse_uint(field(f, k, where), k); });
  };
  CheckpointMeta md;
  md.model = io_parse([&] { return parse_model_kind(field(f, "model", where)); });
  md.seed = num("seed");
  md.kernel_size = num("kernel_size");
  md.kappa = io_parse([&] { return parse_double(field(f, "kappa", where), "kappa"); });
  md.final_dc = io_parse([&] { return parse_bool(field(f, "final_dc", where), "final_dc"); });

  ModelParams p;
  p.sg = nd::zero_params(num("coils"), num("channels"));
  p.cascades = num("cascades");
  p.lambda_dc = io_parse([&] { return parse_double(field(f, "lambda_dc", where), "lambda_dc"); });
  for (std::size_t l = 0; l < nd::SGBlockParams::kLayers; ++l) {
    RealTensor w = read_cxt_real(dir / layer_file(l, "weight"));
    RealTensor b = read_cxt_real(dir / layer_file(l, "bias"));
    require_shape(w.shape(), p.sg.weights[l].shape(), layer_file(l, "weight"));
    require_shape(b.shape(), p.sg.biases[l].shape(), layer_file(l, "bias"));
    p.sg.weights[l] = std::move(w);
    p.sg.biases[l] = std::move(b);
  }
  const RealTensor eta = read_cxt_real(dir / "eta.cxt");
  const RealTensor gamma = read_cxt_real(dir / "gamma.cxt");
  require_shape(eta.shape(), {p.cascades}, "eta.cxt");
  require_shape(gamma.shape(), {p.cascades}, "gamma.cxt");
  p.eta = eta.storage();
  p.gamma = gamma.storage();
  p.validate();
  if (meta) *meta = md;
  return p;
}

std::string history_csv(const std::vector<HistoryEntry>& history) {
  std::ostringstream out;
  out << kHistoryHeader << "\n";
  for (const HistoryEntry& h : history) {
    out << h.epoch << "," << h.step << "," << format_double(h.loss) << "\n";
  }
  return out.str();
}

std::string encode_pgm(const RealTensor& img) {
  if (img.ndim() != 2) throw ShapeError("pgm: expected a 2-D image");
  const std::size_t h = img.dim(0);
  const std::size_t w = img.dim(1);
  double peak = 0.0;
  for (double v : img.storage()) {
    if (std::isfinite(v)) peak = std::max(peak, v);
  }
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (double v : img.storage()) {
    const double s = (peak > 0.0 && std::isfinite(v)) ? std::clamp(v / peak, 0.0, 1.0) : 0.0;
    out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(255.0 * s))));
  }
  return out;
}

void write_pgm(const fs::path& path, const RealTensor& img) { write_text(path, encode_pgm(img)); }

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t");
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace psfnet::io
