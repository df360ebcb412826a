fn main() {
    std::process::exit(pcbr::cli::main());
}
