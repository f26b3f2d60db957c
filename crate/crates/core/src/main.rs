fn main() {
    std::process::exit(card::cli::main(std::env::args_os()));
}
