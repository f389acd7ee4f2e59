#ifndef SAFECOR_TEXT_IO_HPP
#define SAFECOR_TEXT_IO_HPP

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace safecor {

/// Equivalent of printf("%.17g") without locale dependence; round-trips bit-exactly.
std::string format_double(double value);

/// Parses the whole of `text` as a double; throws std::invalid_argument otherwise.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::vector<std::string> split_ws(std::string_view line);
std::vector<std::string> split(std::string_view line, char sep);

std::string read_text_file(const std::filesystem::path& path);
/// Writes via a temporary sibling file and rename, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace safecor

#endif  // SAFECOR_TEXT_IO_HPP
