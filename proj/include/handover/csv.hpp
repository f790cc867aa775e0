#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace handover::csv {

/// Fixed 12-significant-digit text for a double; negative zero prints as "0".
std::string format(double value);

/// Writes comma-separated rows; numbers go through format().
class Writer {
public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void header(const std::vector<std::string>& names);
  Writer& field(double value);
  Writer& field(long long value);
  Writer& field(std::string_view text);
  void end_row();

private:
  std::ostream& out_;
  bool first_ = true;
};

/// Splits a CSV file into rows of fields; the first row is returned as-is.
std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path);

/// Writes through a temporary sibling file and renames it into place so a
/// failed run leaves no partial output.
void write_atomically(const std::filesystem::path& path,
                      const std::function<void(std::ostream&)>& writer);

}  // namespace handover::csv
