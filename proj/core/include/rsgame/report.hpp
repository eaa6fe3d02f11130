#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>

// Serialization helpers shared by the CSV/JSON writers: shortest exact float
// formatting and a stable content hash for report envelopes.

namespace rsgame {

std::string g17(double x);
void write_g17(std::ostream& os, double x);

std::uint64_t fnv1a64(const void* data, std::size_t len);

// "fnv1a64:<16 hex digits>" over the raw file bytes
std::string file_fnv1a64_hex(const std::string& path);

}  // namespace rsgame
