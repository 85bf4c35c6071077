fn main() {
    std::process::exit(pinchlab::cli::main());
}
