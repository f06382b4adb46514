#pragma once

#include <string>
#include <string_view>

#include "obfdetect/mir.hpp"

namespace obfdetect::mir {

class ParseError : public DataError {
 public:
  ParseError(int line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Line-oriented text form:
//
//   func gcd(R0, R1) tag=gcd entry=0
//   block 0:
//     cmp_eq R2, R1, 0x0
//     branch R2, 2, 1
//   block 1:
//     ...
//
// Immediates print as hex, memory as [BASE+off]. print/parse round-trip.
std::string print_function(const Function& f);
std::string print_program(const Program& p);
std::string print_instruction(const Instruction& in);
std::string print_terminator(const Terminator& t);

Function parse_function(std::string_view text);
// A program is one `program entry=<name>` line followed by functions.
Program parse_program(std::string_view text);

}  // namespace obfdetect::mir
