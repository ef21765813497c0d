// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#include "mawiprep/capture.hpp"

#include <zlib.h>

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "mawiprep/error.hpp"

namespace mawiprep::capture {
namespace {

constexpr std::uint32_t kMagicMicro = 0xa1b2c3d4;
constexpr std::uint32_t kMagicNano = 0xa1b23c4d;
constexpr std::uint32_t kMagicPcapng = 0x0a0d0d0a;
constexpr std::size_t kGlobalHeaderLen = 24;
constexpr std::size_t kRecordHeaderLen = 16;
constexpr std::uint32_t kMaxCaplen = 256u * 1024u * 1024u;

std::uint16_t be16(const std::uint8_t* p) { return static_cast<std::uint16_t>((p[0] << 8) | p[1]); }

std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint32_t swap32(std::uint32_t v) {
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

void put_le16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

// Transport layer. `data` starts at the transport header, `avail` is what the
// snapshot kept, `ip_payload_len` what the IP header claims.
void dissect_transport(PacketRecord& r, const std::uint8_t* data, std::size_t avail,
                       std::uint32_t ip_payload_len, bool first_fragment) {
  r.payload_len = ip_payload_len;
  if (r.protocol == kProtoTcp) {
    r.tcp_flags = 0;
    r.tcp_window = 0;
    if (!first_fragment) return;
    if (avail >= 4) {
      r.src_port = be16(data);
      r.dst_port = be16(data + 2);
    }
    std::uint32_t hlen = 20;
    if (avail >= 13) hlen = static_cast<std::uint32_t>(data[12] >> 4) * 4u;
    if (avail >= 14) r.tcp_flags = data[13];
    if (avail >= 16) r.tcp_window = be16(data + 14);
    r.transport_header_len = hlen;
  } else if (r.protocol == kProtoUdp) {
    if (!first_fragment) return;
    if (avail >= 4) {
      r.src_port = be16(data);
      r.dst_port = be16(data + 2);
    }
    r.transport_header_len = 8;
  } else {
    return;
  }
  r.payload_len = ip_payload_len > r.transport_header_len ? ip_payload_len - r.transport_header_len : 0;
}

void dissect_ipv4(PacketRecord& r, const std::uint8_t* data, std::size_t avail) {
  if (avail < 20 || (data[0] >> 4) != 4) return;
  const std::uint32_t ihl = static_cast<std::uint32_t>(data[0] & 0x0f) * 4u;
  if (ihl < 20) return;
  r.ip_version = 4;
  r.ip_header_len = ihl;
  r.protocol = data[9];
  r.src_ip = IpAddress::v4(std::span<const std::uint8_t, 4>(data + 12, 4));
  r.dst_ip = IpAddress::v4(std::span<const std::uint8_t, 4>(data + 16, 4));
  std::uint32_t total = be16(data + 2);
  // TSO offload captures carry a zero total length; fall back to the snapshot.
  if (total == 0) total = static_cast<std::uint32_t>(avail);
  const std::uint32_t ip_payload = total > ihl ? total - ihl : 0;
  const bool first_fragment = (be16(data + 6) & 0x1fff) == 0;
  const std::size_t t_avail = avail > ihl ? avail - ihl : 0;
  dissect_transport(r, data + ihl, t_avail, ip_payload, first_fragment);
}

void dissect_ipv6(PacketRecord& r, const std::uint8_t* data, std::size_t avail) {
  if (avail < 40 || (data[0] >> 4) != 6) return;
  r.ip_version = 6;
  r.src_ip = IpAddress::v6(std::span<const std::uint8_t, 16>(data + 8, 16));
  r.dst_ip = IpAddress::v6(std::span<const std::uint8_t, 16>(data + 24, 16));
  const std::uint32_t payload = be16(data + 4);
  std::uint8_t next = data[6];
  std::uint32_t hlen = 40;
  bool first_fragment = true;
  // Walk extension headers while the snapshot allows.
  for (;;) {
    if (next == 0 || next == 43 || next == 60) {
      if (avail < hlen + 2) break;
      const std::uint8_t nh = data[hlen];
      hlen += (static_cast<std::uint32_t>(data[hlen + 1]) + 1) * 8;
      next = nh;
    } else if (next == 44) {
      if (avail < hlen + 8) break;
      const std::uint8_t nh = data[hlen];
      first_fragment = (be16(data + hlen + 2) & 0xfff8) == 0;
      hlen += 8;
      next = nh;
    } else if (next == 51) {
      if (avail < hlen + 2) break;
      const std::uint8_t nh = data[hlen];
      hlen += (static_cast<std::uint32_t>(data[hlen + 1]) + 2) * 4;
      next = nh;
    } else {
      break;
    }
  }
  r.protocol = next;
  r.ip_header_len = hlen;
  const std::uint32_t total = payload + 40;
  const std::uint32_t ip_payload = total > hlen ? total - hlen : 0;
  const std::size_t t_avail = avail > hlen ? avail - hlen : 0;
  dissect_transport(r, data + hlen, t_avail, ip_payload, first_fragment);
}

void dissect_network(PacketRecord& r, const std::uint8_t* data, std::size_t avail) {
  if (avail == 0) return;
  switch (data[0] >> 4) {
    case 4: dissect_ipv4(r, data, avail); break;
    case 6: dissect_ipv6(r, data, avail); break;
    default: break;
  }
}

void dissect_by_ethertype(PacketRecord& r, std::uint16_t ethertype, const std::uint8_t* data,
                          std::size_t avail) {
  if (ethertype == 0x0800 && avail > 0 && (data[0] >> 4) == 4) dissect_ipv4(r, data, avail);
  if (ethertype == 0x86dd && avail > 0 && (data[0] >> 4) == 6) dissect_ipv6(r, data, avail);
}

}  // namespace

PacketRecord dissect(std::span<const std::uint8_t> frame, LinkType link, std::int64_t ts_us,
                     std::uint32_t wire_len) {
  PacketRecord r;
  r.ts_us = ts_us;
  r.wire_len = wire_len;
  r.raw_frame.assign(frame.begin(), frame.end());
  const std::uint8_t* data = frame.data();
  const std::size_t size = frame.size();
  switch (link) {
    case LinkType::Ethernet: {
      if (size < 14) break;
      std::size_t off = 12;
      std::uint16_t ethertype = be16(data + off);
      // Up to two stacked VLAN tags (802.1Q / 802.1ad).
      for (int tags = 0; tags < 2 && (ethertype == 0x8100 || ethertype == 0x88a8); ++tags) {
        if (size < off + 6) return r;
        off += 4;
        ethertype = be16(data + off);
      }
      off += 2;
      dissect_by_ethertype(r, ethertype, data + off, size - off);
      break;
    }
    case LinkType::LinuxSll:
      if (size < 16) break;
      dissect_by_ethertype(r, be16(data + 14), data + 16, size - 16);
      break;
    case LinkType::Null: {
      if (size < 4) break;
      const std::uint32_t family = le32(data);
      const std::uint32_t fam = family > 0xffff ? swap32(family) : family;
      if (fam == 2) dissect_ipv4(r, data + 4, size - 4);
      if (fam == 24 || fam == 28 || fam == 30) dissect_ipv6(r, data + 4, size - 4);
      break;
    }
    case LinkType::Raw: dissect_network(r, data, size); break;
    case LinkType::Ipv4: dissect_ipv4(r, data, size); break;
    case LinkType::Ipv6: dissect_ipv6(r, data, size); break;
  }
  if (!r.is_ip()) {
    // A half-parsed header must not leak partial fields into a non-IP record.
    PacketRecord clean;
    clean.ts_us = ts_us;
    clean.wire_len = wire_len;
    clean.raw_frame = std::move(r.raw_frame);
    return clean;
  }
  return r;
}

// ---------------------------------------------------------------------------

struct CaptureReader::Impl {
  std::filesystem::path path;
  gzFile file = nullptr;
  bool compressed = false;
  bool swapped = false;
  bool nano = false;
  std::uint32_t snaplen = 0;
  LinkType link = LinkType::Ethernet;
  std::size_t count = 0;
  std::vector<std::uint8_t> frame;

  ~Impl() {
    if (file) gzclose(file);
  }

  std::uint32_t field(const std::uint8_t* p) const {
    const std::uint32_t v = le32(p);
    return swapped ? swap32(v) : v;
  }

  // Reads exactly n bytes; returns the number actually read.
  std::size_t read_bytes(std::uint8_t* dst, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
      const int rc = gzread(file, dst + got, static_cast<unsigned>(n - got));
      if (rc < 0) {
        int errnum = 0;
        const char* msg = gzerror(file, &errnum);
        throw Error(ErrorCategory::Io, path.string() + ": read failed: " + msg);
      }
      if (rc == 0) break;
      got += static_cast<std::size_t>(rc);
    }
    return got;
  }
};

CaptureReader::CaptureReader(const std::filesystem::path& path) : impl_(std::make_unique<Impl>()) {
  impl_->path = path;
  std::array<std::uint8_t, 4> lead{};
  {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw Error(ErrorCategory::Io, path.string() + ": cannot open capture");
    probe.read(reinterpret_cast<char*>(lead.data()), lead.size());
    if (probe.gcount() < 2) throw Error(ErrorCategory::Format, path.string() + ": file too short for a capture");
  }
  impl_->compressed = lead[0] == 0x1f && lead[1] == 0x8b;

  impl_->file = gzopen(path.c_str(), "rb");
  if (!impl_->file) throw Error(ErrorCategory::Io, path.string() + ": cannot open capture");
  gzbuffer(impl_->file, 256 * 1024);

  std::array<std::uint8_t, kGlobalHeaderLen> hdr{};
  const std::size_t got = impl_->read_bytes(hdr.data(), hdr.size());
  const std::uint32_t magic = got >= 4 ? le32(hdr.data()) : 0;
  if (magic == kMagicPcapng) {
    throw Error(ErrorCategory::Unsupported, path.string() + ": pcapng captures are not supported");
  }
  if (magic == kMagicMicro || magic == kMagicNano) {
    impl_->swapped = false;
  } else if (swap32(magic) == kMagicMicro || swap32(magic) == kMagicNano) {
    impl_->swapped = true;
  } else {
    throw Error(ErrorCategory::Format, path.string() + ": unrecognized capture magic");
  }
  if (got < hdr.size()) {
    throw TruncatedCaptureError(0, path.string() + ": truncated pcap global header");
  }
  impl_->nano = (impl_->swapped ? swap32(magic) : magic) == kMagicNano;
  impl_->snaplen = impl_->field(hdr.data() + 16);
  impl_->link = static_cast<LinkType>(impl_->field(hdr.data() + 20) & 0x0fffffffu);
}

CaptureReader::~CaptureReader() = default;
CaptureReader::CaptureReader(CaptureReader&&) noexcept = default;
CaptureReader& CaptureReader::operator=(CaptureReader&&) noexcept = default;

LinkType CaptureReader::link_type() const noexcept { return impl_->link; }
bool CaptureReader::nanosecond_resolution() const noexcept { return impl_->nano; }
bool CaptureReader::compressed() const noexcept { return impl_->compressed; }
std::uint32_t CaptureReader::snaplen() const noexcept { return impl_->snaplen; }
std::size_t CaptureReader::packets_read() const noexcept { return impl_->count; }

bool CaptureReader::next(PacketRecord& out) {
  Impl& s = *impl_;
  std::array<std::uint8_t, kRecordHeaderLen> hdr{};
  const std::size_t got = s.read_bytes(hdr.data(), hdr.size());
  if (got == 0) return false;
  if (got < hdr.size()) {
    throw TruncatedCaptureError(s.count, s.path.string() + ": truncated packet header after " +
                                             std::to_string(s.count) + " packets");
  }
  const std::uint32_t sec = s.field(hdr.data());
  const std::uint32_t frac = s.field(hdr.data() + 4);
  const std::uint32_t caplen = s.field(hdr.data() + 8);
  const std::uint32_t wire = s.field(hdr.data() + 12);
  if (caplen > kMaxCaplen) {
    throw Error(ErrorCategory::Format, s.path.string() + ": implausible capture length " +
                                           std::to_string(caplen) + " in packet " + std::to_string(s.count));
  }
  s.frame.resize(caplen);
  if (s.read_bytes(s.frame.data(), caplen) < caplen) {
    throw TruncatedCaptureError(s.count, s.path.string() + ": truncated packet data after " +
                                             std::to_string(s.count) + " packets");
  }
  const std::int64_t ts = static_cast<std::int64_t>(sec) * 1'000'000 + (s.nano ? frac / 1000 : frac);
  out = dissect(s.frame, s.link, ts, wire);
  ++s.count;
  return true;
}

std::vector<PacketRecord> read_capture(const std::filesystem::path& path) {
  CaptureReader reader(path);
  std::vector<PacketRecord> out;
  PacketRecord r;
  while (reader.next(r)) out.push_back(std::move(r));
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> global_header_bytes(LinkType link) {
  std::vector<std::uint8_t> out;
  out.reserve(kGlobalHeaderLen);
  put_le32(out, kMagicMicro);
  put_le16(out, 2);
  put_le16(out, 4);
  put_le32(out, 0);       // thiszone
  put_le32(out, 0);       // sigfigs
  put_le32(out, 262144);  // snaplen
  put_le32(out, static_cast<std::uint32_t>(link));
  return out;
}

void append_packet_bytes(std::vector<std::uint8_t>& buffer, const PacketRecord& record) {
  if (record.raw_frame.empty()) {
    throw Error(ErrorCategory::Contract, "packet record without raw frame bytes cannot be written");
  }
  if (record.ts_us < 0) throw Error(ErrorCategory::Contract, "negative packet timestamp");
  const auto sec = static_cast<std::uint32_t>(record.ts_us / 1'000'000);
  const auto usec = static_cast<std::uint32_t>(record.ts_us % 1'000'000);
  const auto caplen = static_cast<std::uint32_t>(record.raw_frame.size());
  put_le32(buffer, sec);
  put_le32(buffer, usec);
  put_le32(buffer, caplen);
  put_le32(buffer, record.wire_len);
  buffer.insert(buffer.end(), record.raw_frame.begin(), record.raw_frame.end());
}

struct CaptureWriter::Impl {
  std::filesystem::path path;
  std::ofstream out;
  std::size_t count = 0;
  std::vector<std::uint8_t> buffer;

  void flush() {
    if (buffer.empty()) return;
    out.write(reinterpret_cast<const char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
    if (!out) throw Error(ErrorCategory::Io, path.string() + ": write failed");
    buffer.clear();
  }
};

CaptureWriter::CaptureWriter(const std::filesystem::path& path, LinkType link, bool append)
    : impl_(std::make_unique<Impl>()) {
  impl_->path = path;
  std::error_code ec;
  const bool extend = append && std::filesystem::file_size(path, ec) >= kGlobalHeaderLen && !ec;
  impl_->out.open(path, std::ios::binary | (extend ? std::ios::app : std::ios::trunc));
  if (!impl_->out) throw Error(ErrorCategory::Io, path.string() + ": cannot open for writing");
  if (!extend) impl_->buffer = global_header_bytes(link);
}

CaptureWriter::~CaptureWriter() {
  if (impl_ && impl_->out.is_open()) {
    try {
      close();
    } catch (...) {
    }
  }
}

CaptureWriter::CaptureWriter(CaptureWriter&&) noexcept = default;
CaptureWriter& CaptureWriter::operator=(CaptureWriter&&) noexcept = default;

void CaptureWriter::write(const PacketRecord& record) {
  append_packet_bytes(impl_->buffer, record);
  ++impl_->count;
  if (impl_->buffer.size() >= (1u << 20)) impl_->flush();
}

void CaptureWriter::close() {
  if (!impl_->out.is_open()) return;
  impl_->flush();
  impl_->out.close();
  if (!impl_->out) throw Error(ErrorCategory::Io, impl_->path.string() + ": close failed");
}

std::size_t CaptureWriter::packets_written() const noexcept { return impl_->count; }

std::size_t write_capture(std::span<const PacketRecord> records, const std::filesystem::path& path,
                          LinkType link) {
  CaptureWriter writer(path, link);
  for (const auto& r : records) writer.write(r);
  writer.close();
  return writer.packets_written();
}

}  // namespace mawiprep::capture
