#pragma once

#include <stdexcept>
#include <string>

namespace sigdla {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed assembly source; carries a 1-based line number.
struct ParseError : Error {
    ParseError(int line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line(line) {}
    int line;
};

// Invalid binary encoding or out-of-range instruction field.
struct DecodeError : Error {
    using Error::Error;
};

// Out-of-bounds or misaligned memory access.
struct MemoryFault : Error {
    using Error::Error;
};

// Execution-time failure: bad machine state, accumulator overflow,
// exceeded cycle budget. Carries the program counter when known.
struct EngineFault : Error {
    explicit EngineFault(const std::string& what, long pc = -1)
        : Error(pc >= 0 ? "pc " + std::to_string(pc) + ": " + what : what), pc(pc) {}
    long pc;
};

// Workload or plan construction failure (capacity, shape, range).
struct MapError : Error {
    using Error::Error;
};

}  // namespace sigdla
