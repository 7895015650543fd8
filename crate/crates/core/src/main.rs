fn main() {
    std::process::exit(splineortho::cli::main());
}
