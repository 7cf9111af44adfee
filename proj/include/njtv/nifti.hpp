#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "njtv/volume.hpp"

namespace njtv {

namespace detail {

#pragma pack(push, 1)
struct Nifti1Header {
  int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  int32_t extents;
  int16_t session_error;
  char regular;
  char dim_info;
  int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  int16_t intent_code;
  int16_t datatype;
  int16_t bitpix;
  int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  int16_t qform_code;
  int16_t sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

template <typename T>
inline void byteswap(T& v) {
  auto* b = reinterpret_cast<unsigned char*>(&v);
  for (size_t i = 0; i < sizeof(T) / 2; ++i)
    std::swap(b[i], b[sizeof(T) - 1 - i]);
}

inline void swap_header(Nifti1Header& h) {
  byteswap(h.sizeof_hdr);
  byteswap(h.extents);
  byteswap(h.session_error);
  for (auto& d : h.dim) byteswap(d);
  byteswap(h.intent_p1);
  byteswap(h.intent_p2);
  byteswap(h.intent_p3);
  byteswap(h.intent_code);
  byteswap(h.datatype);
  byteswap(h.bitpix);
  byteswap(h.slice_start);
  for (auto& p : h.pixdim) byteswap(p);
  byteswap(h.vox_offset);
  byteswap(h.scl_slope);
  byteswap(h.scl_inter);
  byteswap(h.slice_end);
  byteswap(h.cal_max);
  byteswap(h.cal_min);
  byteswap(h.slice_duration);
  byteswap(h.toffset);
  byteswap(h.glmax);
  byteswap(h.glmin);
  byteswap(h.qform_code);
  byteswap(h.sform_code);
  byteswap(h.quatern_b);
  byteswap(h.quatern_c);
  byteswap(h.quatern_d);
  byteswap(h.qoffset_x);
  byteswap(h.qoffset_y);
  byteswap(h.qoffset_z);
  for (auto& s : h.srow_x) byteswap(s);
  for (auto& s : h.srow_y) byteswap(s);
  for (auto& s : h.srow_z) byteswap(s);
}

inline Affine4 affine_from_quaternion(const Nifti1Header& h) {
  const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
  double a2 = 1.0 - (b * b + c * c + d * d);
  const double a = a2 > 0 ? std::sqrt(a2) : 0.0;
  const double qfac = h.pixdim[0] < 0 ? -1.0 : 1.0;
  const double dx = std::abs(h.pixdim[1]), dy = std::abs(h.pixdim[2]),
               dz = std::abs(h.pixdim[3]);
  Affine4 m;
  m(0, 0) = (a * a + b * b - c * c - d * d) * dx;
  m(0, 1) = 2 * (b * c - a * d) * dy;
  m(0, 2) = 2 * (b * d + a * c) * dz * qfac;
  m(1, 0) = 2 * (b * c + a * d) * dx;
  m(1, 1) = (a * a + c * c - b * b - d * d) * dy;
  m(1, 2) = 2 * (c * d - a * b) * dz * qfac;
  m(2, 0) = 2 * (b * d - a * c) * dx;
  m(2, 1) = 2 * (c * d + a * b) * dy;
  m(2, 2) = (a * a + d * d - b * b - c * c) * dz * qfac;
  m(0, 3) = h.qoffset_x;
  m(1, 3) = h.qoffset_y;
  m(2, 3) = h.qoffset_z;
  return m;
}

struct GzFile {
  gzFile f = nullptr;
  explicit GzFile(const std::string& path, const char* mode) {
    f = gzopen(path.c_str(), mode);
  }
  ~GzFile() {
    if (f) gzclose(f);
  }
  GzFile(const GzFile&) = delete;
  GzFile& operator=(const GzFile&) = delete;
};

}  // namespace detail

/// Loads a single-frame 3D NIfTI-1 volume (.nii or .nii.gz). The world
/// affine is taken from the sform when sform_code > 0, else the qform,
/// else diagonal pixdim. scl_slope/scl_inter are applied; NaNs become 0
/// and are recorded in the missing mask.
inline Volume load_nifti(const std::string& path) {
  detail::GzFile gz(path, "rb");
  if (!gz.f) throw IoError("load_nifti: cannot open " + path);
  detail::Nifti1Header h{};
  if (gzread(gz.f, &h, sizeof(h)) != static_cast<int>(sizeof(h)))
    throw FormatError("load_nifti: truncated header in " + path);
  bool swapped = false;
  if (h.sizeof_hdr != 348) {
    detail::swap_header(h);
    swapped = true;
    if (h.sizeof_hdr != 348)
      throw FormatError("load_nifti: bad sizeof_hdr in " + path);
  }
  if (std::strncmp(h.magic, "n+1", 3) != 0 &&
      std::strncmp(h.magic, "ni1", 3) != 0)
    throw FormatError("load_nifti: bad magic in " + path);
  if (std::strncmp(h.magic, "ni1", 3) == 0)
    throw FormatError("load_nifti: two-file (.hdr/.img) NIfTI not supported");
  int ndim = h.dim[0];
  for (int a = ndim; a >= 1; --a) {
    if (h.dim[a] > 1) break;
    --ndim;  // trailing singleton dims are harmless
  }
  if (ndim > 3)
    throw FormatError("load_nifti: only single-frame 3D volumes supported");

  Volume v;
  v.dims = {std::max<int>(h.dim[1], 1), std::max<int>(h.dim[2], 1),
            std::max<int>(h.dim[3], 1)};

  if (h.sform_code > 0) {
    for (int c = 0; c < 4; ++c) {
      v.world(0, c) = h.srow_x[c];
      v.world(1, c) = h.srow_y[c];
      v.world(2, c) = h.srow_z[c];
    }
  } else if (h.qform_code > 0) {
    v.world = detail::affine_from_quaternion(h);
  } else {
    v.world = Affine4::scaling({std::abs(h.pixdim[1]) > 0 ? std::abs(h.pixdim[1]) : 1.0,
                                std::abs(h.pixdim[2]) > 0 ? std::abs(h.pixdim[2]) : 1.0,
                                std::abs(h.pixdim[3]) > 0 ? std::abs(h.pixdim[3]) : 1.0});
  }
  for (int a = 0; a < 3; ++a) v.voxel_size[a] = v.world.column_norm(a);

  const size_t n = v.size();
  const double slope = (h.scl_slope == 0.0f) ? 1.0 : h.scl_slope;
  const double inter = (h.scl_slope == 0.0f) ? 0.0 : h.scl_inter;
  const long offset = static_cast<long>(h.vox_offset);
  if (offset > 348) gzseek(gz.f, offset, SEEK_SET);

  auto read_raw = [&](auto tag) {
    using T = decltype(tag);
    std::vector<T> raw(n);
    const size_t bytes = n * sizeof(T);
    if (static_cast<size_t>(gzread(gz.f, raw.data(),
                                   static_cast<unsigned>(bytes))) != bytes)
      throw FormatError("load_nifti: truncated voxel data in " + path);
    if (swapped && sizeof(T) > 1)
      for (auto& x : raw) detail::byteswap(x);
    v.data.resize(n);
    for (size_t i = 0; i < n; ++i)
      v.data[i] = slope * static_cast<double>(raw[i]) + inter;
  };

  switch (h.datatype) {
    case 2:  read_raw(uint8_t{}); break;
    case 4:  read_raw(int16_t{}); break;
    case 8:  read_raw(int32_t{}); break;
    case 16: read_raw(float{}); break;
    case 64: read_raw(double{}); break;
    default:
      throw FormatError("load_nifti: unsupported datatype " +
                        std::to_string(h.datatype) + " in " + path);
  }

  for (size_t i = 0; i < n; ++i) {
    if (!std::isfinite(v.data[i])) {
      if (v.missing.empty()) v.missing.assign(n, 0);
      v.missing[i] = 1;
      v.data[i] = 0.0;
    }
  }
  return v;
}

/// Writes a float32 single-file NIfTI-1 with sform = v.world (sform_code 2).
/// The file is written to a temporary name and renamed into place.
inline void save_nifti(const Volume& v, const std::string& path) {
  detail::Nifti1Header h{};
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  h.dim[1] = static_cast<int16_t>(v.dims[0]);
  h.dim[2] = static_cast<int16_t>(v.dims[1]);
  h.dim[3] = static_cast<int16_t>(v.dims[2]);
  for (int a = 4; a < 8; ++a) h.dim[a] = 1;
  h.datatype = 16;  // float32
  h.bitpix = 32;
  h.pixdim[0] = 1.0f;
  for (int a = 0; a < 3; ++a)
    h.pixdim[a + 1] = static_cast<float>(v.voxel_size[a]);
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.xyzt_units = 2;  // mm
  h.qform_code = 0;
  h.sform_code = 2;
  for (int c = 0; c < 4; ++c) {
    h.srow_x[c] = static_cast<float>(v.world(0, c));
    h.srow_y[c] = static_cast<float>(v.world(1, c));
    h.srow_z[c] = static_cast<float>(v.world(2, c));
  }
  std::memcpy(h.magic, "n+1\0", 4);

  std::vector<float> raw(v.size());
  for (size_t i = 0; i < raw.size(); ++i)
    raw[i] = static_cast<float>(v.data[i]);

  const std::string tmp = path + ".tmp";
  {
    // gzopen with mode "wb" still gzip-compresses; use "wbT" (no
    // compression, no gzip wrapper) for plain .nii.
    const bool gzip = path.size() > 3 && path.substr(path.size() - 3) == ".gz";
    detail::GzFile gz(tmp, gzip ? "wb" : "wbT");
    if (!gz.f) throw IoError("save_nifti: cannot open " + tmp);
    const char pad[4] = {0, 0, 0, 0};
    if (gzwrite(gz.f, &h, sizeof(h)) != static_cast<int>(sizeof(h)) ||
        gzwrite(gz.f, pad, 4) != 4 ||
        static_cast<size_t>(gzwrite(gz.f, raw.data(),
                                    static_cast<unsigned>(raw.size() *
                                                          sizeof(float)))) !=
            raw.size() * sizeof(float)) {
      throw IoError("save_nifti: write failed for " + tmp);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("save_nifti: cannot rename " + tmp + " to " + path);
}

}  // namespace njtv
