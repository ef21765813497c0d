// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal Parquet support: flat schemas, one row group, one PLAIN data page
// per column chunk, no compression. Enough for the tables this project
// produces, readable by any standard Parquet implementation.

#include <cstring>
#include <map>
#include <memory>
#include <variant>

#include "mawiprep/error.hpp"
#include "mawiprep/table.hpp"

namespace mawiprep {
namespace {

// Thrift compact protocol type ids.
enum : std::uint8_t {
  kTBoolTrue = 1,
  kTBoolFalse = 2,
  kTByte = 3,
  kTI16 = 4,
  kTI32 = 5,
  kTI64 = 6,
  kTDouble = 7,
  kTBinary = 8,
  kTList = 9,
  kTSet = 10,
  kTMap = 11,
  kTStruct = 12,
};

// parquet.thrift enums
constexpr std::int32_t kTypeInt64 = 2;
constexpr std::int32_t kTypeDouble = 5;
constexpr std::int32_t kTypeByteArray = 6;
constexpr std::int32_t kRepRequired = 0;
constexpr std::int32_t kRepOptional = 1;
constexpr std::int32_t kConvertedUtf8 = 0;
constexpr std::int32_t kEncodingPlain = 0;
constexpr std::int32_t kEncodingRle = 3;
constexpr std::int32_t kCodecUncompressed = 0;
constexpr std::int32_t kPageData = 0;

constexpr char kMagic[] = "PAR1";
constexpr char kCreatedBy[] = "mawiprep parquet writer";

class ThriftWriter {
 public:
  std::vector<std::uint8_t>& bytes() { return out_; }

  void struct_begin() {
    stack_.push_back(last_);
    last_ = 0;
  }
  void struct_end() {
    out_.push_back(0);
    last_ = stack_.back();
    stack_.pop_back();
  }
  void field_struct(std::int16_t id) {
    field(id, kTStruct);
    struct_begin();
  }
  void field_i32(std::int16_t id, std::int32_t v) {
    field(id, kTI32);
    varint(zigzag(v));
  }
  void field_i64(std::int16_t id, std::int64_t v) {
    field(id, kTI64);
    varint(zigzag(v));
  }
  void field_binary(std::int16_t id, std::string_view s) {
    field(id, kTBinary);
    binary(s);
  }
  void field_list(std::int16_t id, std::uint8_t elem_type, std::size_t size) {
    field(id, kTList);
    if (size < 15) {
      out_.push_back(static_cast<std::uint8_t>((size << 4) | elem_type));
    } else {
      out_.push_back(static_cast<std::uint8_t>(0xf0 | elem_type));
      varint(size);
    }
  }
  void elem_i32(std::int32_t v) { varint(zigzag(v)); }
  void binary(std::string_view s) {
    varint(s.size());
    out_.insert(out_.end(), s.begin(), s.end());
  }

 private:
  static std::uint64_t zigzag(std::int64_t v) {
    return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
  }
  void varint(std::uint64_t v) {
    while (v >= 0x80) {
      out_.push_back(static_cast<std::uint8_t>(v | 0x80));
      v >>= 7;
    }
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  void field(std::int16_t id, std::uint8_t type) {
    const int delta = id - last_;
    if (delta > 0 && delta <= 15) {
      out_.push_back(static_cast<std::uint8_t>((delta << 4) | type));
    } else {
      out_.push_back(type);
      varint(zigzag(id));
    }
    last_ = id;
  }

  std::vector<std::uint8_t> out_;
  std::vector<std::int16_t> stack_;
  std::int16_t last_ = 0;
};

void put_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_le64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_uvarint(std::vector<std::uint8_t>& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<std::uint8_t>(v | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(v));
}

// Definition levels (bit width 1) as RLE runs, prefixed by their byte length.
std::vector<std::uint8_t> encode_def_levels(const Column& col) {
  std::vector<std::uint8_t> rle;
  std::size_t i = 0;
  const std::size_t n = col.size();
  while (i < n) {
    const bool valid = !col.is_null(i);
    std::size_t j = i;
    while (j < n && !col.is_null(j) == valid) ++j;
    put_uvarint(rle, static_cast<std::uint64_t>(j - i) << 1);
    rle.push_back(valid ? 1 : 0);
    i = j;
  }
  std::vector<std::uint8_t> out;
  put_le32(out, static_cast<std::uint32_t>(rle.size()));
  out.insert(out.end(), rle.begin(), rle.end());
  return out;
}

std::int32_t physical_type(ColumnType t) {
  switch (t) {
    case ColumnType::Int64: return kTypeInt64;
    case ColumnType::Double: return kTypeDouble;
    case ColumnType::String: return kTypeByteArray;
  }
  return kTypeByteArray;
}

// --- reading ----------------------------------------------------------------

struct TValue;
using TStruct = std::map<std::int16_t, TValue>;
using TList = std::vector<TValue>;

struct TValue {
  std::variant<std::int64_t, double, std::string, std::shared_ptr<TStruct>, std::shared_ptr<TList>> v;

  std::int64_t i() const {
    if (auto p = std::get_if<std::int64_t>(&v)) return *p;
    throw Error(ErrorCategory::Format, "parquet metadata: expected integer");
  }
  const std::string& s() const {
    if (auto p = std::get_if<std::string>(&v)) return *p;
    throw Error(ErrorCategory::Format, "parquet metadata: expected binary");
  }
  const TStruct& st() const {
    if (auto p = std::get_if<std::shared_ptr<TStruct>>(&v)) return **p;
    throw Error(ErrorCategory::Format, "parquet metadata: expected struct");
  }
  const TList& list() const {
    if (auto p = std::get_if<std::shared_ptr<TList>>(&v)) return **p;
    throw Error(ErrorCategory::Format, "parquet metadata: expected list");
  }
};

class ThriftReader {
 public:
  ThriftReader(const std::uint8_t* data, std::size_t size) : p_(data), end_(data + size) {}

  TStruct read_struct() {
    TStruct st;
    std::int16_t last = 0;
    for (;;) {
      const std::uint8_t head = byte();
      if (head == 0) break;
      const std::uint8_t type = head & 0x0f;
      const int delta = head >> 4;
      std::int16_t id = 0;
      if (delta) {
        id = static_cast<std::int16_t>(last + delta);
      } else {
        id = static_cast<std::int16_t>(unzigzag(uvarint()));
      }
      last = id;
      st[id] = value(type);
    }
    return st;
  }

  const std::uint8_t* position() const { return p_; }

 private:
  std::uint8_t byte() {
    if (p_ >= end_) throw Error(ErrorCategory::Format, "parquet metadata truncated");
    return *p_++;
  }
  std::uint64_t uvarint() {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      const std::uint8_t b = byte();
      v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
      if (!(b & 0x80)) return v;
    }
    throw Error(ErrorCategory::Format, "parquet metadata: bad varint");
  }
  static std::int64_t unzigzag(std::uint64_t v) {
    return static_cast<std::int64_t>(v >> 1) ^ -static_cast<std::int64_t>(v & 1);
  }
  TValue value(std::uint8_t type) {
    switch (type) {
      case kTBoolTrue: return {std::int64_t{1}};
      case kTBoolFalse: return {std::int64_t{0}};
      case kTByte: return {static_cast<std::int64_t>(static_cast<std::int8_t>(byte()))};
      case kTI16:
      case kTI32:
      case kTI64: return {unzigzag(uvarint())};
      case kTDouble: {
        if (end_ - p_ < 8) throw Error(ErrorCategory::Format, "parquet metadata truncated");
        double d = 0;
        std::memcpy(&d, p_, 8);
        p_ += 8;
        return {d};
      }
      case kTBinary: {
        const std::uint64_t n = uvarint();
        if (static_cast<std::uint64_t>(end_ - p_) < n) throw Error(ErrorCategory::Format, "parquet metadata truncated");
        std::string s(reinterpret_cast<const char*>(p_), n);
        p_ += n;
        return {std::move(s)};
      }
      case kTList:
      case kTSet: {
        const std::uint8_t head = byte();
        std::uint64_t n = head >> 4;
        if (n == 15) n = uvarint();
        const std::uint8_t et = head & 0x0f;
        auto list = std::make_shared<TList>();
        for (std::uint64_t k = 0; k < n; ++k) {
          if (et == kTBoolTrue || et == kTBoolFalse) {
            list->push_back({static_cast<std::int64_t>(byte() == 1)});
          } else {
            list->push_back(value(et));
          }
        }
        return {list};
      }
      case kTMap: {
        const std::uint64_t n = uvarint();
        auto list = std::make_shared<TList>();
        if (n) {
          const std::uint8_t kv = byte();
          for (std::uint64_t k = 0; k < n; ++k) {
            list->push_back(value(kv >> 4));
            list->push_back(value(kv & 0x0f));
          }
        }
        return {list};
      }
      case kTStruct: return {std::make_shared<TStruct>(read_struct())};
      default: throw Error(ErrorCategory::Format, "parquet metadata: unknown thrift type");
    }
  }

  const std::uint8_t* p_;
  const std::uint8_t* end_;
};

const TValue& req(const TStruct& st, std::int16_t id, const char* what) {
  const auto it = st.find(id);
  if (it == st.end()) throw Error(ErrorCategory::Format, std::string("parquet metadata: missing ") + what);
  return it->second;
}

std::int64_t opt_int(const TStruct& st, std::int16_t id, std::int64_t fallback) {
  const auto it = st.find(id);
  return it == st.end() ? fallback : it->second.i();
}

std::uint32_t rd_le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<std::uint8_t> decode_def_levels(const std::uint8_t*& p, const std::uint8_t* end, std::size_t count) {
  if (end - p < 4) throw Error(ErrorCategory::Format, "parquet page truncated");
  const std::uint32_t len = rd_le32(p);
  p += 4;
  if (static_cast<std::size_t>(end - p) < len) throw Error(ErrorCategory::Format, "parquet page truncated");
  const std::uint8_t* q = p;
  const std::uint8_t* qend = p + len;
  p += len;
  std::vector<std::uint8_t> levels;
  levels.reserve(count);
  while (levels.size() < count && q < qend) {
    std::uint64_t h = 0;
    for (int shift = 0;; shift += 7) {
      if (q >= qend) throw Error(ErrorCategory::Format, "parquet levels truncated");
      const std::uint8_t b = *q++;
      h |= static_cast<std::uint64_t>(b & 0x7f) << shift;
      if (!(b & 0x80)) break;
    }
    if (h & 1) {
      const std::uint64_t groups = h >> 1;
      for (std::uint64_t g = 0; g < groups; ++g) {
        if (q >= qend) throw Error(ErrorCategory::Format, "parquet levels truncated");
        const std::uint8_t bits = *q++;
        for (int k = 0; k < 8 && levels.size() < count; ++k) levels.push_back((bits >> k) & 1);
      }
    } else {
      if (q >= qend) throw Error(ErrorCategory::Format, "parquet levels truncated");
      const std::uint8_t v = *q++ & 1;
      levels.insert(levels.end(), std::min<std::uint64_t>(h >> 1, count - levels.size()), v);
    }
  }
  if (levels.size() != count) throw Error(ErrorCategory::Format, "parquet definition levels short");
  return levels;
}

}  // namespace

std::vector<std::uint8_t> to_parquet(const Table& table) {
  std::vector<std::uint8_t> file(kMagic, kMagic + 4);
  struct ChunkInfo {
    std::int64_t offset;
    std::int64_t size;
  };
  std::vector<ChunkInfo> chunks;
  const std::size_t rows = table.rows();

  if (rows > 0) {
    for (const auto& col : table.columns()) {
      std::vector<std::uint8_t> page = encode_def_levels(col);
      for (std::size_t r = 0; r < rows; ++r) {
        if (col.is_null(r)) continue;
        switch (col.type()) {
          case ColumnType::Int64: put_le64(page, static_cast<std::uint64_t>(col.int_at(r))); break;
          case ColumnType::Double: {
            std::uint64_t bits = 0;
            const double v = col.number_at(r);
            std::memcpy(&bits, &v, 8);
            put_le64(page, bits);
            break;
          }
          case ColumnType::String: {
            const auto& s = col.string_at(r);
            put_le32(page, static_cast<std::uint32_t>(s.size()));
            page.insert(page.end(), s.begin(), s.end());
            break;
          }
        }
      }
      if (page.size() > 0x7fffffffu) throw Error(ErrorCategory::Unsupported, "column too large for one parquet page");
      ThriftWriter header;
      header.struct_begin();
      header.field_i32(1, kPageData);
      header.field_i32(2, static_cast<std::int32_t>(page.size()));
      header.field_i32(3, static_cast<std::int32_t>(page.size()));
      header.field_struct(5);
      header.field_i32(1, static_cast<std::int32_t>(rows));
      header.field_i32(2, kEncodingPlain);
      header.field_i32(3, kEncodingRle);
      header.field_i32(4, kEncodingRle);
      header.struct_end();
      header.struct_end();
      const auto offset = static_cast<std::int64_t>(file.size());
      file.insert(file.end(), header.bytes().begin(), header.bytes().end());
      file.insert(file.end(), page.begin(), page.end());
      chunks.push_back({offset, static_cast<std::int64_t>(file.size()) - offset});
    }
  }

  ThriftWriter meta;
  meta.struct_begin();
  meta.field_i32(1, 1);
  meta.field_list(2, kTStruct, table.cols() + 1);
  meta.struct_begin();
  meta.field_binary(4, "schema");
  meta.field_i32(5, static_cast<std::int32_t>(table.cols()));
  meta.struct_end();
  for (const auto& col : table.columns()) {
    meta.struct_begin();
    meta.field_i32(1, physical_type(col.type()));
    meta.field_i32(3, kRepOptional);
    meta.field_binary(4, col.name());
    if (col.type() == ColumnType::String) meta.field_i32(6, kConvertedUtf8);
    meta.struct_end();
  }
  meta.field_i64(3, static_cast<std::int64_t>(rows));
  meta.field_list(4, kTStruct, rows > 0 ? 1 : 0);
  if (rows > 0) {
    std::int64_t total = 0;
    for (const auto& c : chunks) total += c.size;
    meta.struct_begin();
    meta.field_list(1, kTStruct, table.cols());
    for (std::size_t c = 0; c < table.cols(); ++c) {
      const auto& col = table.columns()[c];
      meta.struct_begin();
      meta.field_i64(2, chunks[c].offset);
      meta.field_struct(3);
      meta.field_i32(1, physical_type(col.type()));
      meta.field_list(2, kTI32, 2);
      meta.elem_i32(kEncodingPlain);
      meta.elem_i32(kEncodingRle);
      meta.field_list(3, kTBinary, 1);
      meta.binary(col.name());
      meta.field_i32(4, kCodecUncompressed);
      meta.field_i64(5, static_cast<std::int64_t>(rows));
      meta.field_i64(6, chunks[c].size);
      meta.field_i64(7, chunks[c].size);
      meta.field_i64(9, chunks[c].offset);
      meta.struct_end();
      meta.struct_end();
    }
    meta.field_i64(2, total);
    meta.field_i64(3, static_cast<std::int64_t>(rows));
    meta.struct_end();
  }
  meta.field_binary(6, kCreatedBy);
  meta.struct_end();

  const auto& mb = meta.bytes();
  file.insert(file.end(), mb.begin(), mb.end());
  put_le32(file, static_cast<std::uint32_t>(mb.size()));
  file.insert(file.end(), kMagic, kMagic + 4);
  return file;
}

void write_parquet(const Table& table, const std::filesystem::path& path) {
  write_file_atomic(path, to_parquet(table));
}

Table read_parquet(const std::filesystem::path& path) {
  const std::string raw = read_file(path);
  const auto* data = reinterpret_cast<const std::uint8_t*>(raw.data());
  const std::size_t size = raw.size();
  if (size < 12 || std::memcmp(data, kMagic, 4) != 0 || std::memcmp(data + size - 4, kMagic, 4) != 0) {
    throw Error(ErrorCategory::Format, path.string() + ": not a parquet file");
  }
  const std::uint32_t meta_len = rd_le32(data + size - 8);
  if (meta_len > size - 12) throw Error(ErrorCategory::Format, path.string() + ": bad parquet footer");
  ThriftReader mr(data + size - 8 - meta_len, meta_len);
  const TStruct meta = mr.read_struct();

  const auto& schema = req(meta, 2, "schema").list();
  if (schema.empty()) throw Error(ErrorCategory::Format, "parquet: empty schema");
  std::vector<Column> cols;
  std::vector<bool> optional;
  for (std::size_t i = 1; i < schema.size(); ++i) {
    const auto& el = schema[i].st();
    if (opt_int(el, 5, 0) != 0) throw Error(ErrorCategory::Unsupported, "parquet: nested schemas are not supported");
    const auto type = req(el, 1, "column type").i();
    ColumnType ct;
    if (type == kTypeInt64) ct = ColumnType::Int64;
    else if (type == kTypeDouble) ct = ColumnType::Double;
    else if (type == kTypeByteArray) ct = ColumnType::String;
    else throw Error(ErrorCategory::Unsupported, "parquet: unsupported physical type " + std::to_string(type));
    const auto rep = opt_int(el, 3, kRepRequired);
    if (rep != kRepRequired && rep != kRepOptional) throw Error(ErrorCategory::Unsupported, "parquet: repeated columns");
    optional.push_back(rep == kRepOptional);
    cols.emplace_back(req(el, 4, "column name").s(), ct);
  }

  const auto it_rg = meta.find(4);
  if (it_rg != meta.end()) {
    for (const auto& rgv : it_rg->second.list()) {
      const auto& chunks = req(rgv.st(), 1, "column chunks").list();
      if (chunks.size() != cols.size()) throw Error(ErrorCategory::Format, "parquet: column chunk count mismatch");
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const auto& md = req(chunks[c].st(), 3, "column metadata").st();
        if (opt_int(md, 4, 0) != kCodecUncompressed) throw Error(ErrorCategory::Unsupported, "parquet: compressed column");
        const auto num_values = static_cast<std::size_t>(req(md, 5, "num_values").i());
        auto offset = static_cast<std::size_t>(req(md, 9, "data_page_offset").i());
        std::size_t done = 0;
        while (done < num_values) {
          if (offset >= size) throw Error(ErrorCategory::Format, "parquet: page offset out of range");
          ThriftReader hr(data + offset, size - offset);
          const TStruct ph = hr.read_struct();
          const auto page_size = static_cast<std::size_t>(req(ph, 3, "page size").i());
          const std::uint8_t* p = hr.position();
          const std::uint8_t* end = p + page_size;
          if (end > data + size) throw Error(ErrorCategory::Format, "parquet: page out of range");
          offset = static_cast<std::size_t>(end - data);
          if (req(ph, 1, "page type").i() != kPageData) {
            if (req(ph, 1, "page type").i() == 2) {
              throw Error(ErrorCategory::Unsupported, "parquet: dictionary encoding is not supported");
            }
            continue;
          }
          const auto& dph = req(ph, 5, "data page header").st();
          const auto n = static_cast<std::size_t>(req(dph, 1, "page values").i());
          if (req(dph, 2, "encoding").i() != kEncodingPlain) {
            throw Error(ErrorCategory::Unsupported, "parquet: only PLAIN encoding is supported");
          }
          std::vector<std::uint8_t> levels(n, 1);
          if (optional[c]) levels = decode_def_levels(p, end, n);
          auto& col = cols[c];
          for (std::size_t k = 0; k < n; ++k) {
            if (!levels[k]) {
              col.push_null();
              continue;
            }
            switch (col.type()) {
              case ColumnType::Int64:
              case ColumnType::Double: {
                if (end - p < 8) throw Error(ErrorCategory::Format, "parquet: page data truncated");
                std::uint64_t bits = 0;
                for (int b = 7; b >= 0; --b) bits = (bits << 8) | p[b];
                p += 8;
                if (col.type() == ColumnType::Int64) {
                  col.push_int(static_cast<std::int64_t>(bits));
                } else {
                  double v = 0;
                  std::memcpy(&v, &bits, 8);
                  col.push_double(v);
                }
                break;
              }
              case ColumnType::String: {
                if (end - p < 4) throw Error(ErrorCategory::Format, "parquet: page data truncated");
                const std::uint32_t len = rd_le32(p);
                p += 4;
                if (static_cast<std::size_t>(end - p) < len) throw Error(ErrorCategory::Format, "parquet: page data truncated");
                col.push_string(std::string(reinterpret_cast<const char*>(p), len));
                p += len;
                break;
              }
            }
          }
          done += n;
        }
      }
    }
  }
  return Table(std::move(cols));
}

}  // namespace mawiprep
