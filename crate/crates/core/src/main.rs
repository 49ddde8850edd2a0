fn main() {
    std::process::exit(aniso::cli::main());
}
