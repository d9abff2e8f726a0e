fn main() {
    std::process::exit(safezo::cli::main());
}
