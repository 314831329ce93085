fn main() {
    std::process::exit(seqmt::cli::main_with_args(std::env::args_os()));
}
