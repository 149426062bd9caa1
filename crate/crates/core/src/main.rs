fn main() {
    std::process::exit(covband::cli::main(std::env::args_os()));
}
