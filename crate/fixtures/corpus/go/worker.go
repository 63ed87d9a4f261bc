func Worker(jobs <-chan int, results chan<- int) {
	for j := range jobs {
		select {
		case results <- j * 2:
		default:
			continue
		}
	}
}
