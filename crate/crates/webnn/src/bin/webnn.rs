fn main() {
    std::process::exit(webnn::cli::main_with_args(std::env::args_os()));
}
