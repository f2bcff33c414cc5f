fn main() {
    std::process::exit(seglens::cli::main());
}
